"""Writer for the binary embedding container consumed by the training stack.

The layout is fixed and little-endian throughout:

    offset 0   4 bytes   magic b"MTPE"
    offset 4   uint16    format version (currently 1)
    offset 6   uint8     dtype code: 1 = float32, 2 = float64
    offset 7   uint32    row count
    offset 11  uint32    column count
    offset 15  payload   rows*cols values, row-major

This module is written against the published byte layout only; it shares no
code with the consumer, so the two sides cross-check each other.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ExportError

MAGIC = b"MTPE"
VERSION = 1
HEADER = struct.Struct("<4sHBII")

_DTYPE_CODES = {
    np.dtype(np.float32): 1,
    np.dtype(np.float64): 2,
}
_CODE_DTYPES = {code: dt for dt, code in _DTYPE_CODES.items()}


def pack_embedding(matrix: np.ndarray) -> bytes:
    """Serialize a 2-D float matrix into container bytes."""
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise ExportError(f"embedding must be 2-D, got {arr.ndim}-D")
    dtype = np.dtype(arr.dtype)
    if dtype not in _DTYPE_CODES:
        raise ExportError(f"unsupported dtype {dtype}, expected float32 or float64")
    rows, cols = arr.shape
    header = HEADER.pack(MAGIC, VERSION, _DTYPE_CODES[dtype], rows, cols)
    payload = np.ascontiguousarray(arr).tobytes()
    return header + payload


def unpack_embedding(blob: bytes) -> np.ndarray:
    """Deserialize container bytes back into a matrix (self-check helper)."""
    if len(blob) < HEADER.size:
        raise ExportError(f"blob too short for header ({len(blob)} bytes)")
    magic, version, code, rows, cols = HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ExportError(f"bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise ExportError(f"unsupported version {version} at offset 4")
    if code not in _CODE_DTYPES:
        raise ExportError(f"unknown dtype code {code} at offset 6")
    dtype = _CODE_DTYPES[code]
    expected = HEADER.size + rows * cols * dtype.itemsize
    if len(blob) != expected:
        raise ExportError(f"expected {expected} bytes, got {len(blob)}")
    flat = np.frombuffer(blob, dtype=dtype, offset=HEADER.size)
    return flat.reshape(rows, cols).copy()


def write_embedding(path, matrix: np.ndarray) -> None:
    """Write a matrix to ``path`` in container format."""
    blob = pack_embedding(matrix)
    with open(path, "wb") as fh:
        fh.write(blob)
