"""Dataset manifest: JSON index over embedding files.

Schema (paths are relative to the manifest's directory):

    {
      "schema_version": 1,
      "task": "regression" | "classification",
      "targets": {
        "<target_id>": {"protein": "<path>.mtpe", "pocket_indices": [int, ...]}
      },
      "samples": [
        {"sample_id": str, "molecule": "<path>.mtpe", "target_id": str,
         "label": number, "split": "train" | "test"},
        ...
      ]
    }

Validation is total: every problem across every target and sample is
collected and reported in one ValidationError. Shape checks read only the
15-byte embedding headers, so validating a large corpus stays cheap, and
the streaming accessors below never hold more than one molecule plus one
target in memory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from .embedding import load_embedding, read_header

SPLITS = ("train", "test")
TASKS = ("regression", "classification")


@dataclass
class TargetRecord:
    target_id: str
    protein_path: Path
    pocket_indices: list
    n_rows: int
    d_pro: int


@dataclass
class Sample:
    sample_id: str
    molecule_path: Path
    target_id: str
    label: float
    split: str
    n_rows: int
    d_mol: int


class DatasetManifest:
    """Validated index plus streaming access to payloads."""

    def __init__(self, path: Path, task: str, targets: dict, samples: list):
        self.path = Path(path)
        self.task = task
        self.targets = targets
        self.samples = samples
        self._target_cache = (None, None)  # (target_id, matrix)

    @property
    def d_mol(self) -> int:
        return self.samples[0].d_mol

    @property
    def d_pro(self) -> int:
        return next(iter(self.targets.values())).d_pro

    def split_samples(self, split: str) -> list:
        if split not in SPLITS:
            raise ValidationError([f"unknown split {split!r}, expected one of {SPLITS}"])
        return [s for s in self.samples if s.split == split]

    def molecule(self, sample: Sample) -> np.ndarray:
        return load_embedding(sample.molecule_path)

    def target_features(self, target_id: str) -> np.ndarray:
        cached_id, cached = self._target_cache
        if cached_id == target_id:
            return cached
        matrix = load_embedding(self.targets[target_id].protein_path)
        self._target_cache = (target_id, matrix)
        return matrix


def _check_embedding(path: Path, what: str, problems: list):
    """Header-only shape probe. Returns (rows, cols) or None."""
    if not path.is_file():
        problems.append(f"{what}: file not found: {path}")
        return None
    try:
        _, rows, cols = read_header(path)
    except Exception as exc:
        problems.append(f"{what}: {exc}")
        return None
    if rows < 1 or cols < 1:
        problems.append(f"{what}: empty embedding ({rows}x{cols}) in {path}")
        return None
    return rows, cols


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    problems: list = []
    if not path.is_file():
        raise ValidationError([f"manifest not found: {path}"])
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError([f"cannot parse manifest {path}: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ValidationError([f"manifest root must be an object, got {type(raw).__name__}"])

    if raw.get("schema_version") != 1:
        problems.append(f"schema_version must be 1, got {raw.get('schema_version')!r}")
    task = raw.get("task")
    if task not in TASKS:
        problems.append(f"task must be one of {TASKS}, got {task!r}")

    base = path.parent
    targets: dict = {}
    raw_targets = raw.get("targets")
    if not isinstance(raw_targets, dict) or not raw_targets:
        problems.append("targets must be a non-empty mapping")
        raw_targets = {}
    d_pro_seen: dict = {}
    for tid, entry in sorted(raw_targets.items()):
        what = f"target {tid!r}"
        if not isinstance(entry, dict):
            problems.append(f"{what}: entry must be an object")
            continue
        protein = entry.get("protein")
        idx = entry.get("pocket_indices")
        if not isinstance(protein, str):
            problems.append(f"{what}: missing protein path")
            continue
        ppath = base / protein
        shape = _check_embedding(ppath, what, problems)
        if shape is None:
            continue
        rows, cols = shape
        d_pro_seen.setdefault(cols, tid)
        ok_idx = isinstance(idx, list) and idx and all(
            isinstance(i, int) and not isinstance(i, bool) for i in idx
        )
        if not ok_idx:
            problems.append(f"{what}: pocket_indices must be a non-empty list of integers")
            continue
        out_of_range = sorted(i for i in idx if i < 0 or i >= rows)
        if out_of_range:
            problems.append(
                f"{what}: pocket indices out of range for {rows} residues: {out_of_range}"
            )
        if len(set(idx)) != len(idx):
            dupes = sorted({i for i in idx if idx.count(i) > 1})
            problems.append(f"{what}: duplicate pocket indices: {dupes}")
        targets[tid] = TargetRecord(tid, ppath, list(idx), rows, cols)
    if len(d_pro_seen) > 1:
        problems.append(
            "targets disagree on embedding width: "
            + ", ".join(f"{tid!r} has {c} cols" for c, tid in sorted(d_pro_seen.items()))
        )

    samples: list = []
    raw_samples = raw.get("samples")
    if not isinstance(raw_samples, list) or not raw_samples:
        problems.append("samples must be a non-empty list")
        raw_samples = []
    seen_ids: set = set()
    d_mol_seen: dict = {}
    for i, entry in enumerate(raw_samples):
        what = f"sample #{i}"
        if not isinstance(entry, dict):
            problems.append(f"{what}: entry must be an object")
            continue
        sid = entry.get("sample_id")
        if isinstance(sid, str) and sid:
            what = f"sample {sid!r}"
            if sid in seen_ids:
                problems.append(f"{what}: duplicate sample_id")
            seen_ids.add(sid)
        else:
            problems.append(f"{what}: missing sample_id")
            sid = f"#{i}"
        molecule = entry.get("molecule")
        tid = entry.get("target_id")
        label = entry.get("label")
        split = entry.get("split")
        ok = True
        if not isinstance(molecule, str):
            problems.append(f"{what}: missing molecule path")
            ok = False
        if tid not in targets:
            problems.append(f"{what}: unknown target_id {tid!r}")
            ok = False
        if split not in SPLITS:
            problems.append(f"{what}: split must be one of {SPLITS}, got {split!r}")
            ok = False
        if not isinstance(label, (int, float)) or isinstance(label, bool):
            problems.append(f"{what}: label must be a number, got {label!r}")
            ok = False
        elif task == "classification" and label not in (0, 1):
            problems.append(f"{what}: classification label must be 0 or 1, got {label!r}")
            ok = False
        if not ok:
            continue
        mpath = base / molecule
        shape = _check_embedding(mpath, what, problems)
        if shape is None:
            continue
        rows, cols = shape
        d_mol_seen.setdefault(cols, sid)
        samples.append(Sample(sid, mpath, tid, float(label), split, rows, cols))
    if len(d_mol_seen) > 1:
        problems.append(
            "molecules disagree on embedding width: "
            + ", ".join(f"{sid!r} has {c} cols" for c, sid in sorted(d_mol_seen.items()))
        )

    if problems:
        raise ValidationError(problems)
    return DatasetManifest(path, task, targets, samples)
