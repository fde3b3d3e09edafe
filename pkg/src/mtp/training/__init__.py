from .adam import Adam
from .checkpoint import load_checkpoint, save_checkpoint
from .loop import TrainConfig, TrainResult, evaluate_split, evaluation_report, train
from .losses import loss_node, sigmoid
from .metrics import MetricsReport, auc, compute_report, pcc, r2, rmse

__all__ = [
    "Adam",
    "MetricsReport",
    "TrainConfig",
    "TrainResult",
    "auc",
    "compute_report",
    "evaluate_split",
    "evaluation_report",
    "load_checkpoint",
    "loss_node",
    "pcc",
    "r2",
    "rmse",
    "save_checkpoint",
    "sigmoid",
    "train",
]
