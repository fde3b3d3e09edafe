"""Attention capture and per-atom score aggregation.

A forward pass can record every attention map it computes. Scores per
molecule atom are derived map by map:

  - maps where molecule tokens act as keys (self-attention, and the
    concatenated-KV cross variant): an atom's value is the attention mass
    it receives as a key, i.e. the mean of its column over the molecule
    columns;
  - maps where molecule tokens only query (plain cross-attention over
    pocket rows): an atom's value is the focus of its query row, one minus
    the row entropy normalized by log(#keys).

Per-map vectors are averaged and min-max scaled to [0, 1]. A degenerate
(all-equal) profile maps to 0.5 everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError


@dataclass
class AttentionEntry:
    kind: str          # "self" or "cross"
    layer: int         # 0 for the macro block, 1..L for refinement layers
    head: int
    weights: np.ndarray  # queries x keys, rows sum to 1
    mol_keys: int      # leading key columns that are molecule tokens

    def label(self) -> str:
        return f"{self.kind}.l{self.layer}.h{self.head}"


@dataclass
class AttentionRecord:
    entries: list = field(default_factory=list)

    def add(self, kind: str, layer: int, head: int, weights: np.ndarray, mol_keys: int):
        self.entries.append(
            AttentionEntry(kind, layer, head, np.array(weights, copy=True), mol_keys)
        )


def atom_attention_scores(record: AttentionRecord, n_atoms: int) -> np.ndarray:
    """Aggregate recorded maps into one score per molecule atom, in [0, 1]."""
    if not record.entries:
        raise ContractError("atom_attention_scores: no attention maps were recorded")
    per_map = []
    for entry in record.entries:
        w = np.asarray(entry.weights, dtype=np.float64)
        if entry.mol_keys > 0:
            if entry.mol_keys != n_atoms:
                raise ContractError(
                    f"attention map {entry.label()} has {entry.mol_keys} molecule keys, "
                    f"expected {n_atoms}"
                )
            per_map.append(w[:, :n_atoms].mean(axis=0))
        else:
            if w.shape[0] != n_atoms:
                raise ContractError(
                    f"attention map {entry.label()} has {w.shape[0]} query rows, "
                    f"expected {n_atoms}"
                )
            n_keys = w.shape[1]
            if n_keys < 2:
                # A single key carries no focus information.
                per_map.append(np.zeros(n_atoms))
                continue
            p = np.where(w > 0, w, 1.0)  # 0 log 0 := 0
            entropy = -(w * np.log(p)).sum(axis=1)
            per_map.append(1.0 - entropy / np.log(n_keys))
    profile = np.mean(per_map, axis=0)
    lo, hi = float(profile.min()), float(profile.max())
    if hi - lo <= 1e-12:
        return np.full(n_atoms, 0.5)
    return (profile - lo) / (hi - lo)
