"""Receptor-conditioned molecular property models.

The package couples a coarse, whole-target conditioning block with
per-layer pocket cross-attention over a small reverse-mode autodiff core.
See the README for the file formats and CLI.
"""

from . import data, model, nn, training
from .errors import (
    ConfigError,
    ContractError,
    DataError,
    FormatError,
    MtpError,
    ShapeError,
    ValidationError,
)
from .gradcheck import GradCheckReport, check_model_gradients
from .model import MtpConfig, MtpParams, init_params
from .training import TrainConfig, train

__all__ = [
    "ConfigError",
    "ContractError",
    "DataError",
    "FormatError",
    "GradCheckReport",
    "MtpConfig",
    "MtpError",
    "MtpParams",
    "ShapeError",
    "TrainConfig",
    "ValidationError",
    "check_model_gradients",
    "data",
    "init_params",
    "model",
    "nn",
    "train",
    "training",
]

__version__ = "0.1.0"
