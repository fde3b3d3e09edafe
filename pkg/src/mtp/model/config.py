"""Model hyperparameters and the canonical config hash."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

from ..errors import ConfigError

ADALN_STYLES = ("direct", "one-plus-gamma")
TASKS = ("regression", "classification")


@dataclass(frozen=True)
class MtpConfig:
    """Architecture switches for the conditioning stack.

    enable_mts gates the target-conditioned normalization of the macro
    block (the attention block itself always runs, so turning everything
    off still leaves a plain self-attention + FFN stack). enable_mps gates
    the per-layer pocket cross-attention. enable_ffn gates every FFN
    sub-block, including the one inside the macro block.

    ffn_hidden left as None resolves to 2 * d_model.
    """

    d_model: int = 256
    n_layers: int = 3
    n_heads: int = 1
    ffn_hidden: int | None = None
    dropout_p: float = 0.1
    enable_mts: bool = True
    enable_mps: bool = True
    enable_ffn: bool = True
    kv_concat_mol: bool = False
    adaln_style: str = "direct"
    task: str = "regression"
    seed: int = 0

    def validate(self) -> "MtpConfig":
        if self.d_model < 2:
            raise ConfigError(f"d_model must be >= 2, got {self.d_model}")
        if self.n_layers < 1:
            raise ConfigError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.n_heads < 1:
            raise ConfigError(f"n_heads must be >= 1, got {self.n_heads}")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )
        if self.ffn_hidden is not None and self.ffn_hidden < 1:
            raise ConfigError(f"ffn_hidden must be >= 1, got {self.ffn_hidden}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must satisfy 0 <= p < 1, got {self.dropout_p}")
        if self.adaln_style not in ADALN_STYLES:
            raise ConfigError(
                f"adaln_style must be one of {ADALN_STYLES}, got {self.adaln_style!r}"
            )
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        return self

    def resolved(self) -> "MtpConfig":
        """Fill derived defaults so two configs hash equal iff they build
        the same model."""
        self.validate()
        if self.ffn_hidden is None:
            return dataclasses.replace(self, ffn_hidden=2 * self.d_model)
        return self

    def ffn_width(self) -> int:
        return self.ffn_hidden if self.ffn_hidden is not None else 2 * self.d_model

    def to_dict(self) -> dict:
        return dataclasses.asdict(self.resolved())

    @classmethod
    def from_dict(cls, data: dict) -> "MtpConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"model config must be a mapping, got {type(data).__name__}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown model config field(s): {', '.join(unknown)}")
        return cls(**data).validate()


def config_hash(config: MtpConfig, d_mol: int, d_pro: int) -> str:
    """sha256 over the resolved config plus input widths, hex-encoded.

    The hash pins everything that determines parameter shapes and forward
    semantics, so a checkpoint can refuse to evaluate under a different
    architecture.
    """
    payload = {
        "model": config.to_dict(),
        "d_mol": int(d_mol),
        "d_pro": int(d_pro),
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
