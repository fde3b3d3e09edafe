"""Checkpoint container: named parameter tensors plus the config they
belong to.

Layout (little-endian):

    offset  size  field
    0       4     magic b"MTPC"
    4       2     container version, u16 (currently 1)
    6       32    sha256 config hash, raw bytes
    38      4     metadata length u32, then that many bytes of canonical
                  JSON: {"model": <config dict>, "d_mol": int, "d_pro": int}
    ...     4     tensor count u32
    per tensor:   name length u16, name utf-8, blob length u32, blob --
                  each blob is a complete embedding container (magic MTPE)

Tensors are written in parameter order and the JSON is canonical (sorted
keys, fixed separators), so identical training runs produce byte-identical
files.
"""

from __future__ import annotations

import json
import struct
from collections import OrderedDict
from pathlib import Path

from ..errors import FormatError
from ..data.embedding import pack_embedding, unpack_embedding
from ..model.config import MtpConfig, config_hash
from ..model.params import MtpParams

MAGIC = b"MTPC"
VERSION = 1


def save_checkpoint(params: MtpParams, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cfg = params.config.resolved()
    digest = bytes.fromhex(config_hash(cfg, params.d_mol, params.d_pro))
    meta = json.dumps(
        {"model": cfg.to_dict(), "d_mol": params.d_mol, "d_pro": params.d_pro},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", VERSION)
    out += digest
    out += struct.pack("<I", len(meta))
    out += meta
    out += struct.pack("<I", len(params.tensors))
    for name, tensor in params.tensors.items():
        blob = pack_embedding(tensor)
        encoded = name.encode("utf-8")
        out += struct.pack("<H", len(encoded))
        out += encoded
        out += struct.pack("<I", len(blob))
        out += blob
    path.write_bytes(bytes(out))
    return path


def load_checkpoint(path) -> MtpParams:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read checkpoint: {exc}") from exc
    if len(blob) < 42:
        raise FormatError(f"{path}: truncated checkpoint header (offset 0)")
    if blob[0:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[0:4]!r} at offset 0")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version} at offset 4")
    digest = blob[6:38]
    (meta_len,) = struct.unpack_from("<I", blob, 38)
    pos = 42
    if pos + meta_len > len(blob):
        raise FormatError(f"{path}: metadata overruns file (offset 38)")
    try:
        meta = json.loads(blob[pos:pos + meta_len].decode("utf-8"))
        cfg = MtpConfig.from_dict(meta["model"])
        d_mol = int(meta["d_mol"])
        d_pro = int(meta["d_pro"])
    except Exception as exc:
        raise FormatError(f"{path}: bad checkpoint metadata (offset 42): {exc}") from exc
    expect = config_hash(cfg, d_mol, d_pro)
    if digest.hex() != expect:
        raise FormatError(
            f"{path}: config hash mismatch, stored {digest.hex()} vs computed {expect}"
        )
    pos += meta_len
    if pos + 4 > len(blob):
        raise FormatError(f"{path}: missing tensor count (offset {pos})")
    (count,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    tensors: "OrderedDict" = OrderedDict()
    for _ in range(count):
        if pos + 2 > len(blob):
            raise FormatError(f"{path}: truncated tensor name length (offset {pos})")
        (name_len,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos:pos + name_len].decode("utf-8")
        pos += name_len
        if pos + 4 > len(blob):
            raise FormatError(f"{path}: truncated tensor blob length (offset {pos})")
        (blob_len,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        if pos + blob_len > len(blob):
            raise FormatError(f"{path}: tensor {name!r} overruns file (offset {pos})")
        tensors[name] = unpack_embedding(
            blob[pos:pos + blob_len], source=f"{path}:{name}"
        )
        pos += blob_len
    if pos != len(blob):
        raise FormatError(f"{path}: {len(blob) - pos} trailing bytes (offset {pos})")
    return MtpParams(tensors, cfg, d_mol, d_pro)
