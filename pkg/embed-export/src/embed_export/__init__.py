"""Offline embedding exporters for activity-prediction datasets.

Turns protein sequences and molecule structure strings into the binary
embedding files and dataset manifests consumed by the training toolchain.
Ships a deterministic descriptor fallback encoder that needs no downloads.
"""

__version__ = "0.1.0"

from .errors import (
    ExportError,
    ManifestError,
    MoleculeError,
    PocketError,
    SequenceError,
)
from .container import pack_embedding, unpack_embedding, write_embedding
from .protein import PROTEIN_WIDTH, protein_embedding, read_fasta
from .molecule import (
    MOLECULE_WIDTH,
    heavy_atom_count,
    molecule_embedding,
    parse_structure,
    read_structure_file,
)
from .pocket import pocket_from_coordinates, pocket_from_indices
from .jobs import (
    ExportJob,
    ExportedFile,
    available_encoders,
    export_molecules,
    export_proteins,
    run_export,
)
from .manifest import build_dataset, load_description

__all__ = [
    "ExportError",
    "SequenceError",
    "MoleculeError",
    "PocketError",
    "ManifestError",
    "pack_embedding",
    "unpack_embedding",
    "write_embedding",
    "PROTEIN_WIDTH",
    "protein_embedding",
    "read_fasta",
    "MOLECULE_WIDTH",
    "heavy_atom_count",
    "molecule_embedding",
    "parse_structure",
    "read_structure_file",
    "pocket_from_indices",
    "pocket_from_coordinates",
    "ExportJob",
    "ExportedFile",
    "available_encoders",
    "export_proteins",
    "export_molecules",
    "run_export",
    "build_dataset",
    "load_description",
    "__version__",
]
