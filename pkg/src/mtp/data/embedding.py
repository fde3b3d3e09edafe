"""Binary container for one embedding matrix.

Layout (little-endian throughout):

    offset  size  field
    0       4     magic b"MTPE"
    4       2     format version, u16 (currently 1)
    6       1     dtype code, u8: 1 = float32, 2 = float64
    7       4     rows, u32
    11      4     cols, u32
    15      ...   payload, rows*cols values, row-major

Every format violation raises FormatError naming the byte offset of the
offending field.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, ShapeError

MAGIC = b"MTPE"
VERSION = 1
HEADER = struct.Struct("<4sHBII")
DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
CODE_FOR_DTYPE = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}


def pack_embedding(matrix: np.ndarray) -> bytes:
    """Serialize a 2-D float32/float64 matrix to the container bytes."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ShapeError(f"embedding must be 2-D, got shape {matrix.shape}")
    key = np.dtype(matrix.dtype)
    if key not in CODE_FOR_DTYPE:
        raise ShapeError(f"embedding dtype must be float32 or float64, got {key}")
    rows, cols = matrix.shape
    header = HEADER.pack(MAGIC, VERSION, CODE_FOR_DTYPE[key], rows, cols)
    payload = np.ascontiguousarray(matrix, dtype=key.newbyteorder("<")).tobytes()
    return header + payload


def save_embedding(matrix: np.ndarray, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(pack_embedding(matrix))
    return path


def unpack_embedding(blob: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(blob) < HEADER.size:
        raise FormatError(
            f"{source}: truncated header, {len(blob)} bytes < {HEADER.size} (offset 0)"
        )
    magic, version, code, rows, cols = HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported version {version} at offset 4")
    if code not in DTYPE_CODES:
        raise FormatError(f"{source}: unknown dtype code {code} at offset 6")
    dtype = DTYPE_CODES[code]
    expected = HEADER.size + rows * cols * dtype.itemsize
    if len(blob) != expected:
        raise FormatError(
            f"{source}: payload size mismatch, expected {expected} bytes for "
            f"{rows}x{cols} {dtype.name}, got {len(blob)} (offset {HEADER.size})"
        )
    data = np.frombuffer(blob, dtype=dtype, offset=HEADER.size)
    return data.reshape(rows, cols).copy()


def load_embedding(path) -> np.ndarray:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read embedding file: {exc}") from exc
    return unpack_embedding(blob, source=str(path))


def read_header(path) -> tuple:
    """(dtype, rows, cols) from the 15-byte header, without the payload."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(HEADER.size)
    except OSError as exc:
        raise FormatError(f"{path}: cannot read embedding file: {exc}") from exc
    if len(head) < HEADER.size:
        raise FormatError(
            f"{path}: truncated header, {len(head)} bytes < {HEADER.size} (offset 0)"
        )
    magic, version, code, rows, cols = HEADER.unpack(head)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version} at offset 4")
    if code not in DTYPE_CODES:
        raise FormatError(f"{path}: unknown dtype code {code} at offset 6")
    return DTYPE_CODES[code], rows, cols


def write_embedding_stream(matrix: np.ndarray, fh: io.BufferedWriter):
    fh.write(pack_embedding(matrix))
