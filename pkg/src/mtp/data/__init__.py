from .embedding import (
    load_embedding,
    pack_embedding,
    read_header,
    save_embedding,
    unpack_embedding,
)
from .manifest import DatasetManifest, Sample, TargetRecord, load_manifest
from .synthetic import SyntheticSpec, generate_synthetic, load_synthetic_spec

__all__ = [
    "DatasetManifest",
    "Sample",
    "SyntheticSpec",
    "TargetRecord",
    "generate_synthetic",
    "load_embedding",
    "load_manifest",
    "load_synthetic_spec",
    "pack_embedding",
    "read_header",
    "save_embedding",
    "unpack_embedding",
]
