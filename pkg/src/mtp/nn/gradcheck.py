"""Central finite-difference machinery for verifying backward passes.

`finite_difference` perturbs each parameter entry in place and re-runs a
caller-supplied loss closure; callers are expected to hand it float64
arrays, since float32 cannot resolve a 1e-4 step against a 1e-4 relative
tolerance.
"""

from __future__ import annotations

import numpy as np


def finite_difference(loss_fn, arrays: dict, step: float = 1e-4) -> dict:
    """Numeric gradients of loss_fn() w.r.t. every entry of every array.

    loss_fn takes no arguments and must read the arrays in `arrays` (they
    are perturbed in place and restored). Returns {name: gradient}.
    """
    grads = {}
    for name, arr in arrays.items():
        flat = arr.reshape(-1)
        g = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            plus = loss_fn()
            flat[i] = orig - step
            minus = loss_fn()
            flat[i] = orig
            g[i] = (plus - minus) / (2.0 * step)
        grads[name] = g.reshape(arr.shape)
    return grads


def max_relative_error(analytic, numeric, floor: float = 1e-7) -> float:
    """Worst relative discrepancy between two gradient arrays.

    Entries whose absolute difference is at or below `floor` count as exact;
    otherwise the difference is scaled by the larger magnitude.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    diff = np.abs(analytic - numeric)
    denom = np.maximum(np.abs(analytic), np.abs(numeric))
    rel = np.where(diff <= floor, 0.0, diff / np.maximum(denom, floor))
    return float(rel.max()) if rel.size else 0.0
