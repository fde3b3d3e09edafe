"""Helpers for choosing pocket residue indices.

Proper pocket detection needs a structure-based cavity tool and is out of
scope here.  These helpers only validate a user-supplied index list, or
apply a plain distance-cutoff HEURISTIC around known ligand coordinates.
Treat the cutoff variant as a rough stand-in, not a pocket predictor.
"""

from __future__ import annotations

import numpy as np

from .errors import PocketError


def pocket_from_indices(indices, n_residues: int) -> list[int]:
    """Validate an explicit residue index list against a sequence length.

    Returns the indices sorted ascending.  Duplicates, non-integers, and
    out-of-range values are rejected.
    """
    if n_residues <= 0:
        raise PocketError(f"n_residues must be positive, got {n_residues}")
    cleaned: list[int] = []
    for pos, value in enumerate(indices):
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise PocketError(f"pocket index at position {pos} is not an integer: {value!r}")
        cleaned.append(int(value))
    if not cleaned:
        raise PocketError("pocket index list is empty")
    bad = sorted(i for i in cleaned if i < 0 or i >= n_residues)
    if bad:
        raise PocketError(f"pocket indices out of range for {n_residues} residues: {bad}")
    if len(set(cleaned)) != len(cleaned):
        dupes = sorted({i for i in cleaned if cleaned.count(i) > 1})
        raise PocketError(f"duplicate pocket indices: {dupes}")
    return sorted(cleaned)


def pocket_from_coordinates(residue_coords, ligand_coords, cutoff: float) -> list[int]:
    """Residues within ``cutoff`` of any ligand point, as sorted indices.

    This is a distance HEURISTIC: it takes one representative 3-D point per
    residue (for example the alpha carbon) and keeps every residue whose
    minimum distance to the ligand point cloud is at most the cutoff.
    """
    residues = np.asarray(residue_coords, dtype=np.float64)
    ligand = np.asarray(ligand_coords, dtype=np.float64)
    if residues.ndim != 2 or residues.shape[1] != 3 or residues.shape[0] == 0:
        raise PocketError(
            f"residue coordinates must have shape (n, 3), got {residues.shape}"
        )
    if ligand.ndim != 2 or ligand.shape[1] != 3 or ligand.shape[0] == 0:
        raise PocketError(f"ligand coordinates must have shape (k, 3), got {ligand.shape}")
    if not np.all(np.isfinite(residues)) or not np.all(np.isfinite(ligand)):
        raise PocketError("coordinates contain non-finite values")
    cutoff = float(cutoff)
    if not np.isfinite(cutoff) or cutoff <= 0.0:
        raise PocketError(f"cutoff must be a positive number, got {cutoff}")
    deltas = residues[:, None, :] - ligand[None, :, :]
    nearest = np.sqrt(np.sum(deltas * deltas, axis=2)).min(axis=1)
    chosen = np.flatnonzero(nearest <= cutoff)
    if chosen.size == 0:
        raise PocketError(
            f"no residues within cutoff {cutoff} of the ligand"
            f" (closest is {nearest.min():.3f})"
        )
    return [int(i) for i in chosen]
