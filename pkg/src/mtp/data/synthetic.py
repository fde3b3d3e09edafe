"""Deterministic synthetic benchmark generator.

Labels follow a pocket-interaction rule the model family can express but a
target-blind model cannot: for a sample with molecule matrix F_mol bound to
target t,

    y = <mean over molecule rows, mean over pocket rows of F_target(t)> + sigma * eps

with the inner product over the first min(d_mol, d_pro) components. Because
each target contributes a different pocket-mean vector, any model that
ignores the target sees an irreducible mixture. Classification thresholds
the same score at its median.

Regeneration from an identical spec is byte-identical: draws happen in one
fixed order from one seeded generator and files carry no timestamps.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .embedding import save_embedding

LABEL_RULES = ("pocket-dot",)


@dataclass(frozen=True)
class SyntheticSpec:
    n_targets: int = 2
    samples_per_target: int = 32
    mol_rows: tuple = (4, 8)
    target_rows: tuple = (10, 16)
    pocket_rows: tuple = (3, 6)
    d_mol: int = 12
    d_pro: int = 12
    label_rule: str = "pocket-dot"
    noise_sigma: float = 0.0
    task: str = "regression"
    test_fraction: float = 0.25
    seed: int = 0

    def validate(self) -> "SyntheticSpec":
        if self.n_targets < 1:
            raise ConfigError(f"n_targets must be >= 1, got {self.n_targets}")
        if self.samples_per_target < 1:
            raise ConfigError(
                f"samples_per_target must be >= 1, got {self.samples_per_target}"
            )
        for field in ("mol_rows", "target_rows", "pocket_rows"):
            rng = getattr(self, field)
            if (len(rng) != 2 or not all(isinstance(v, int) for v in rng)
                    or rng[0] < 1 or rng[0] > rng[1]):
                raise ConfigError(f"{field} must be [lo, hi] with 1 <= lo <= hi, got {rng}")
        if self.pocket_rows[1] > self.target_rows[0]:
            raise ConfigError(
                f"pocket_rows hi ({self.pocket_rows[1]}) may not exceed "
                f"target_rows lo ({self.target_rows[0]})"
            )
        if self.d_mol < 1 or self.d_pro < 1:
            raise ConfigError(
                f"embedding widths must be >= 1, got d_mol={self.d_mol}, d_pro={self.d_pro}"
            )
        if self.label_rule not in LABEL_RULES:
            raise ConfigError(
                f"label_rule must be one of {LABEL_RULES}, got {self.label_rule!r}"
            )
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.task not in ("regression", "classification"):
            raise ConfigError(f"task must be regression or classification, got {self.task!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(
                f"test_fraction must be strictly between 0 and 1, got {self.test_fraction}"
            )
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        if not isinstance(data, dict):
            raise ConfigError(f"synthetic spec must be a mapping, got {type(data).__name__}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown synthetic spec field(s): {', '.join(unknown)}")
        data = dict(data)
        for field in ("mol_rows", "target_rows", "pocket_rows"):
            if field in data:
                value = data[field]
                if not isinstance(value, (list, tuple)):
                    raise ConfigError(f"{field} must be [lo, hi], got {value!r}")
                data[field] = tuple(value)
        return cls(**data).validate()


def load_synthetic_spec(path) -> SyntheticSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse synthetic spec {path}: {exc}") from exc
    return SyntheticSpec.from_dict(raw)


def generate_synthetic(spec: SyntheticSpec, out_dir) -> Path:
    """Write embeddings plus manifest.json under out_dir; returns the
    manifest path."""
    spec = spec.validate()
    out = Path(out_dir)
    (out / "targets").mkdir(parents=True, exist_ok=True)
    (out / "molecules").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    d_dot = min(spec.d_mol, spec.d_pro)

    targets_json: dict = {}
    pocket_means: dict = {}
    for t in range(spec.n_targets):
        tid = f"t{t:03d}"
        n = int(rng.integers(spec.target_rows[0], spec.target_rows[1] + 1))
        protein = rng.standard_normal((n, spec.d_pro)).astype(np.float32)
        p = int(rng.integers(spec.pocket_rows[0], spec.pocket_rows[1] + 1))
        pocket_idx = sorted(int(i) for i in rng.choice(n, size=p, replace=False))
        rel = f"targets/{tid}.mtpe"
        save_embedding(protein, out / rel)
        targets_json[tid] = {"protein": rel, "pocket_indices": pocket_idx}
        pocket_means[tid] = protein[pocket_idx].mean(axis=0)[:d_dot].astype(np.float64)

    n_train = max(1, round(spec.samples_per_target * (1.0 - spec.test_fraction)))
    if n_train >= spec.samples_per_target:
        n_train = spec.samples_per_target - 1
    if n_train < 1:
        raise ConfigError(
            "samples_per_target and test_fraction leave an empty train or test split"
        )

    samples_json: list = []
    scores: list = []
    for t in range(spec.n_targets):
        tid = f"t{t:03d}"
        for i in range(spec.samples_per_target):
            sid = f"s{t:03d}_{i:04d}"
            m = int(rng.integers(spec.mol_rows[0], spec.mol_rows[1] + 1))
            mol = rng.standard_normal((m, spec.d_mol)).astype(np.float32)
            rel = f"molecules/{sid}.mtpe"
            save_embedding(mol, out / rel)
            score = float(
                mol.mean(axis=0)[:d_dot].astype(np.float64) @ pocket_means[tid]
            )
            if spec.noise_sigma > 0:
                score += spec.noise_sigma * float(rng.standard_normal())
            split = "train" if i < n_train else "test"
            samples_json.append(
                {"sample_id": sid, "molecule": rel, "target_id": tid,
                 "label": score, "split": split}
            )
            scores.append(score)

    if spec.task == "classification":
        cut = float(np.median(scores))
        for entry in samples_json:
            entry["label"] = 1 if entry["label"] > cut else 0

    manifest = {
        "schema_version": 1,
        "task": spec.task,
        "targets": targets_json,
        "samples": samples_json,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path
