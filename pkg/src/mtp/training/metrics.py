"""Evaluation metrics, hand-rolled so tie handling is explicit.

AUC is the Mann-Whitney statistic: average ranks with ties sharing their
mean rank, which makes it exactly the probability a random positive
outscores a random negative (ties count half).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from ..errors import DataError


def _pair(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=np.float64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.float64).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise DataError(
            f"metric inputs must have equal length, got {y_true.shape} vs {y_pred.shape}"
        )
    if y_true.size == 0:
        raise DataError("metric inputs are empty")
    return y_true, y_pred


def rmse(y_true, y_pred) -> float:
    y_true, y_pred = _pair(y_true, y_pred)
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))


def pcc(y_true, y_pred) -> float:
    y_true, y_pred = _pair(y_true, y_pred)
    a = y_true - y_true.mean()
    b = y_pred - y_pred.mean()
    sa = np.sqrt(np.sum(a * a))
    sb = np.sqrt(np.sum(b * b))
    if sa == 0.0 or sb == 0.0:
        raise DataError("PCC undefined: an input has zero variance")
    return float(np.sum(a * b) / (sa * sb))


def r2(y_true, y_pred) -> float:
    y_true, y_pred = _pair(y_true, y_pred)
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        raise DataError("R2 undefined: labels have zero variance")
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    return 1.0 - ss_res / ss_tot


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank range."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc(y_true, y_score) -> float:
    y_true, y_score = _pair(y_true, y_score)
    pos = y_true == 1
    neg = y_true == 0
    if not (pos | neg).all():
        raise DataError("AUC labels must be 0 or 1")
    n_pos, n_neg = int(pos.sum()), int(neg.sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC undefined: only one class present")
    ranks = _average_ranks(y_score)
    u = float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass
class MetricsReport:
    task: str
    split: str
    n: int
    rmse: float
    pcc: float | None
    r2: float | None
    auc: float | None
    seed: int
    config_hash: str

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def compute_report(y_true, y_pred, task: str, split: str, seed: int,
                   config_hash: str) -> MetricsReport:
    """Full report; correlation metrics degrade to None when undefined
    (constant predictions, degenerate labels) instead of failing an
    otherwise valid evaluation. For classification, y_pred holds
    probabilities and AUC uses them as scores."""
    y_true, y_pred = _pair(y_true, y_pred)
    if y_true.size < 2:
        raise DataError(f"metrics need at least 2 samples, got {y_true.size}")

    def guarded(fn, *args):
        try:
            return fn(*args)
        except DataError:
            return None

    report = MetricsReport(
        task=task,
        split=split,
        n=int(y_true.size),
        rmse=rmse(y_true, y_pred),
        pcc=guarded(pcc, y_true, y_pred),
        r2=guarded(r2, y_true, y_pred),
        auc=guarded(auc, y_true, y_pred) if task == "classification" else None,
        seed=seed,
        config_hash=config_hash,
    )
    return report
