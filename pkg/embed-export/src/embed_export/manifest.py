"""Assemble a complete dataset directory from one description file.

The description is a small JSON document naming targets (sequences plus
pocket residues) and samples (structure strings with labels and splits):

    {
      "task": "regression",
      "targets": {
        "t0": {"sequence": "MKTAYIAK", "pocket_indices": [1, 3]},
        "t1": {"sequence": "GDVEK",
               "pocket": {"cutoff": 6.0,
                          "residues": [[0,0,0], [4,0,0], [9,0,0]],
                          "ligand": [[3.5,0,0]]}}
      },
      "samples": [
        {"sample_id": "s0", "structure": "CCO", "target_id": "t0",
         "label": 1.25, "split": "train"}
      ]
    }

``build_dataset`` exports every sequence and structure with the descriptor
fallback encoder, writes ``targets/`` and ``molecules/`` subdirectories, and
emits a ``manifest.json`` in the documented dataset-manifest schema with
paths relative to itself.  Pocket residues come either from an explicit
index list or from the distance-cutoff heuristic in ``pocket``.
"""

from __future__ import annotations

import json
import os

from .errors import ManifestError
from .jobs import export_molecules, export_proteins
from .pocket import pocket_from_coordinates, pocket_from_indices

_SPLITS = ("train", "test")


def load_description(path) -> dict:
    """Read and minimally type-check a dataset description file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as err:
        raise ManifestError(f"{path}: not valid JSON ({err})") from err
    if not isinstance(data, dict):
        raise ManifestError(f"{path}: top level must be an object")
    return data


def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ManifestError(f"{where}: unknown key(s) {unknown}")
    missing = sorted(required - set(obj))
    if missing:
        raise ManifestError(f"{where}: missing key(s) {missing}")


def _resolve_pocket(tid: str, entry: dict, n_residues: int) -> list[int]:
    has_indices = "pocket_indices" in entry
    has_cutoff = "pocket" in entry
    if has_indices == has_cutoff:
        raise ManifestError(
            f"target {tid!r}: provide exactly one of 'pocket_indices' or 'pocket'"
        )
    if has_indices:
        return pocket_from_indices(entry["pocket_indices"], n_residues)
    spec = entry["pocket"]
    if not isinstance(spec, dict):
        raise ManifestError(f"target {tid!r}: 'pocket' must be an object")
    _require_keys(spec, {"cutoff", "residues", "ligand"},
                  {"cutoff", "residues", "ligand"}, f"target {tid!r} pocket")
    if len(spec["residues"]) != n_residues:
        raise ManifestError(
            f"target {tid!r}: {len(spec['residues'])} residue coordinates for a"
            f" sequence of {n_residues} residues"
        )
    return pocket_from_coordinates(spec["residues"], spec["ligand"], spec["cutoff"])


def _check_label(value, task: str, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ManifestError(f"{where}: label must be a number, got {value!r}")
    label = float(value)
    if task == "classification" and label not in (0.0, 1.0):
        raise ManifestError(f"{where}: classification label must be 0 or 1, got {value!r}")
    return label


def build_dataset(description: dict, out_dir) -> str:
    """Export all targets and molecules and write a full dataset manifest.

    Returns the manifest path.  The output is a deterministic function of
    the description contents.
    """
    _require_keys(description, {"task", "targets", "samples"},
                  {"task", "targets", "samples"}, "description")
    task = description["task"]
    if task not in ("regression", "classification"):
        raise ManifestError(f"task must be 'regression' or 'classification', got {task!r}")
    targets = description["targets"]
    if not isinstance(targets, dict) or not targets:
        raise ManifestError("'targets' must be a non-empty object")
    samples = description["samples"]
    if not isinstance(samples, list) or not samples:
        raise ManifestError("'samples' must be a non-empty list")

    protein_records: list[tuple[str, str]] = []
    for tid in sorted(targets):
        entry = targets[tid]
        if not isinstance(entry, dict):
            raise ManifestError(f"target {tid!r}: entry must be an object")
        _require_keys(entry, {"sequence", "pocket_indices", "pocket"},
                      {"sequence"}, f"target {tid!r}")
        protein_records.append((tid, entry["sequence"]))

    molecule_records: list[tuple[str, str]] = []
    sample_rows: list[dict] = []
    for k, sample in enumerate(samples):
        where = f"sample {k}"
        if not isinstance(sample, dict):
            raise ManifestError(f"{where}: entry must be an object")
        _require_keys(sample, {"sample_id", "structure", "target_id", "label", "split"},
                      {"sample_id", "structure", "target_id", "label", "split"}, where)
        sid = sample["sample_id"]
        if sample["target_id"] not in targets:
            raise ManifestError(f"{where}: unknown target_id {sample['target_id']!r}")
        if sample["split"] not in _SPLITS:
            raise ManifestError(
                f"{where}: split must be one of {list(_SPLITS)}, got {sample['split']!r}"
            )
        label = _check_label(sample["label"], task, where)
        if any(existing == sid for existing, _ in molecule_records):
            raise ManifestError(f"{where}: duplicate sample_id {sid!r}")
        molecule_records.append((sid, sample["structure"]))
        sample_rows.append(
            {
                "sample_id": sid,
                "molecule": f"molecules/{sid}.mtpe",
                "target_id": sample["target_id"],
                "label": label,
                "split": sample["split"],
            }
        )

    os.makedirs(out_dir, exist_ok=True)
    protein_files = export_proteins(protein_records, os.path.join(out_dir, "targets"))
    export_molecules(molecule_records, os.path.join(out_dir, "molecules"))

    rows_by_target = {f.record_id: f.rows for f in protein_files}
    manifest_targets = {}
    for tid in sorted(targets):
        indices = _resolve_pocket(tid, targets[tid], rows_by_target[tid])
        manifest_targets[tid] = {
            "protein": f"targets/{tid}.mtpe",
            "pocket_indices": indices,
        }

    manifest = {
        "schema_version": 1,
        "task": task,
        "targets": manifest_targets,
        "samples": sample_rows,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path
