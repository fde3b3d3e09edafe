"""Export jobs: run an encoder over an input file and emit embedding files.

Each exported matrix gets two companions:

- a sidecar ``<id>.encoder.json`` recording the encoder id and revision that
  produced the file, for provenance;
- an entry in a manifest fragment (``targets.fragment.json`` or
  ``molecules.fragment.json``) so a later step can assemble a full dataset
  manifest without re-reading the binaries.

Only the ``descriptor-fallback`` encoder ships in this package.  It runs on
the CPU and needs no downloads.  Other encoder ids are reserved for
pretrained models and are rejected with a clear message.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass

from . import __version__
from .container import unpack_embedding, write_embedding
from .errors import ExportError, MoleculeError, SequenceError
from .molecule import (
    ATOM_FEATURE_NAMES,
    molecule_embedding,
    read_structure_file,
)
from .protein import FEATURE_NAMES, protein_embedding, read_fasta

FALLBACK_ENCODER = "descriptor-fallback"
_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


def available_encoders() -> list[str]:
    """Encoder ids usable in this build."""
    return [FALLBACK_ENCODER]


@dataclass(frozen=True)
class ExportJob:
    """One export request: input file, encoder choice, output directory."""

    input_path: str
    kind: str  # "protein" or "molecule"
    out_dir: str
    encoder: str = FALLBACK_ENCODER
    device: str = "cpu"

    def validate(self) -> None:
        if self.kind not in ("protein", "molecule"):
            raise ExportError(f"unknown export kind {self.kind!r}")
        if self.encoder not in available_encoders():
            raise ExportError(
                f"encoder {self.encoder!r} requires pretrained weights that are"
                f" not bundled; available: {', '.join(available_encoders())}"
            )
        if self.device != "cpu":
            raise ExportError(
                f"device {self.device!r} is not supported; the descriptor"
                " fallback runs on 'cpu' only"
            )


@dataclass(frozen=True)
class ExportedFile:
    """Result row for one embedded record."""

    record_id: str
    rows: int
    cols: int
    path: str


def _check_record_id(record_id: str) -> None:
    if not _ID_RE.match(record_id):
        raise ExportError(
            f"record id {record_id!r} is not filename-safe; use letters,"
            " digits, '.', '_', or '-'"
        )


def _write_checked(path: str, matrix) -> None:
    """Write an embedding file and re-parse it to confirm validity."""
    write_embedding(path, matrix)
    with open(path, "rb") as fh:
        back = unpack_embedding(fh.read())
    if back.shape != matrix.shape:
        raise ExportError(f"{path}: round-trip shape mismatch")


def _write_sidecar(path: str, kind: str, encoder: str, width: int, features) -> None:
    record = {
        "encoder": encoder,
        "features": list(features),
        "kind": kind,
        "revision": __version__,
        "width": width,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True, indent=2) + "\n")


def _write_fragment(out_dir: str, name: str, entries: dict) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(entries, sort_keys=True, indent=2) + "\n")
    return path


def export_proteins(
    records: list[tuple[str, str]],
    out_dir: str,
    encoder: str = FALLBACK_ENCODER,
    device: str = "cpu",
) -> list[ExportedFile]:
    """Embed (id, sequence) records into per-target files under ``out_dir``."""
    job_shape = ExportJob("<records>", "protein", out_dir, encoder, device)
    job_shape.validate()
    os.makedirs(out_dir, exist_ok=True)
    results: list[ExportedFile] = []
    fragment: dict[str, dict] = {}
    for k, (rid, sequence) in enumerate(records):
        _check_record_id(rid)
        try:
            matrix = protein_embedding(sequence)
        except SequenceError as err:
            raise SequenceError(f"input {k} ({rid!r}): {err}") from err
        path = os.path.join(out_dir, f"{rid}.mtpe")
        _write_checked(path, matrix)
        _write_sidecar(
            os.path.join(out_dir, f"{rid}.encoder.json"),
            "protein",
            encoder,
            matrix.shape[1],
            FEATURE_NAMES,
        )
        fragment[rid] = {"protein": f"{rid}.mtpe", "rows": int(matrix.shape[0])}
        results.append(ExportedFile(rid, int(matrix.shape[0]), int(matrix.shape[1]), path))
    _write_fragment(out_dir, "targets.fragment.json", {"targets": fragment})
    return results


def export_molecules(
    records: list[tuple[str, str]],
    out_dir: str,
    encoder: str = FALLBACK_ENCODER,
    device: str = "cpu",
) -> list[ExportedFile]:
    """Embed (id, structure string) records into per-molecule files."""
    job_shape = ExportJob("<records>", "molecule", out_dir, encoder, device)
    job_shape.validate()
    os.makedirs(out_dir, exist_ok=True)
    results: list[ExportedFile] = []
    fragment: dict[str, dict] = {}
    for k, (rid, text) in enumerate(records):
        _check_record_id(rid)
        try:
            matrix = molecule_embedding(text)
        except MoleculeError as err:
            raise MoleculeError(f"input {k} ({rid!r}): {err}") from err
        path = os.path.join(out_dir, f"{rid}.mtpe")
        _write_checked(path, matrix)
        _write_sidecar(
            os.path.join(out_dir, f"{rid}.encoder.json"),
            "molecule",
            encoder,
            matrix.shape[1],
            ATOM_FEATURE_NAMES,
        )
        fragment[rid] = {"molecule": f"{rid}.mtpe", "rows": int(matrix.shape[0])}
        results.append(ExportedFile(rid, int(matrix.shape[0]), int(matrix.shape[1]), path))
    _write_fragment(out_dir, "molecules.fragment.json", {"molecules": fragment})
    return results


def run_export(job: ExportJob) -> list[ExportedFile]:
    """Execute a job end to end: read the input file, embed, write files."""
    job.validate()
    if job.kind == "protein":
        records = read_fasta(job.input_path)
        return export_proteins(records, job.out_dir, job.encoder, job.device)
    records = read_structure_file(job.input_path)
    return export_molecules(records, job.out_dir, job.encoder, job.device)
