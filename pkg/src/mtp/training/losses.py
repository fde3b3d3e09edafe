"""Per-sample loss graphs.

Regression uses squared error. Classification uses the numerically stable
logistic loss on raw logits, softplus(z) - z * y, which never exponentiates
a large positive value; the sigmoid is applied only when reporting
probabilities.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError
from ..nn.autodiff import DiffNode, add, scale, softplus, square, sub


def loss_node(pred: DiffNode, label: float, task: str) -> DiffNode:
    if task == "regression":
        target = np.array([[label]], dtype=pred.value.dtype)
        return square(sub(pred, target))
    if task == "classification":
        if label not in (0, 1, 0.0, 1.0):
            raise DataError(f"classification label must be 0 or 1, got {label!r}")
        return add(softplus(pred), scale(pred, -float(label)))
    raise DataError(f"unknown task {task!r}")


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
