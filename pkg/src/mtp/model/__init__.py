from .attention import AttentionEntry, AttentionRecord, atom_attention_scores
from .config import ADALN_STYLES, TASKS, MtpConfig, config_hash
from .forward import (
    adaln,
    feature_abstractor,
    forward_pass,
    mps_forward,
    mtp_forward,
    mts_forward,
    pocket_select,
    predict,
    weight_regressor,
)
from .params import MtpParams, ParamNodes, init_params

__all__ = [
    "ADALN_STYLES",
    "TASKS",
    "AttentionEntry",
    "AttentionRecord",
    "MtpConfig",
    "MtpParams",
    "ParamNodes",
    "adaln",
    "atom_attention_scores",
    "config_hash",
    "feature_abstractor",
    "forward_pass",
    "init_params",
    "mps_forward",
    "mtp_forward",
    "mts_forward",
    "pocket_select",
    "predict",
    "weight_regressor",
]
