"""Parameter container and deterministic initialization.

Tensors live in an ordered dict keyed by dotted block names:

    proj_mol.w, proj_mol.b      molecule input projection (d_mol -> d)
    proj_pro.w, proj_pro.b      target input projection (d_pro -> d)
    mts.cond.w, mts.cond.b      weight regressor (d -> 6d), bias initialized
                                to the identity pattern (gamma=1, beta=0)
    mts.attn.{wq,wk,wv,wo}      macro-block self-attention
    mts.ffn.{w1,b1,w2,b2}       macro-block FFN
    mps.{l}.{wq,wk,wv,wo}       per-layer cross-attention; wo starts at zero
                                so an untrained layer is exactly a no-op
    ffn.{l}.{w1,b1,w2,b2}       per-layer refinement FFN
    head.{w1,b1,w2,b2}          pooled readout MLP (d -> d/2 -> 1)

Initialization order is fixed and every block is drawn from the config
seed, so identical (config, d_mol, d_pro) always reproduces identical
bytes.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from ..errors import ConfigError, ShapeError
from ..nn.autodiff import parameter
from .config import MtpConfig


class MtpParams:
    """Named tensors plus the dims they were built for."""

    def __init__(self, tensors: "OrderedDict[str, np.ndarray]", config: MtpConfig,
                 d_mol: int, d_pro: int):
        self.tensors = tensors
        self.config = config.resolved()
        self.d_mol = int(d_mol)
        self.d_pro = int(d_pro)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self):
        return list(self.tensors)

    def astype(self, dtype) -> "MtpParams":
        out = OrderedDict((k, v.astype(dtype)) for k, v in self.tensors.items())
        return MtpParams(out, self.config, self.d_mol, self.d_pro)

    def copy(self) -> "MtpParams":
        out = OrderedDict((k, v.copy()) for k, v in self.tensors.items())
        return MtpParams(out, self.config, self.d_mol, self.d_pro)

    def node_view(self) -> "ParamNodes":
        return ParamNodes(self)

    def blocks(self):
        """Group tensor names by their leading block label."""
        groups: "OrderedDict[str, list[str]]" = OrderedDict()
        for name in self.tensors:
            head = name.rsplit(".", 1)[0]
            groups.setdefault(head, []).append(name)
        return groups


class ParamNodes:
    """One DiffNode per tensor for a single recorded forward pass."""

    def __init__(self, params: MtpParams):
        self.params = params
        self.nodes = OrderedDict(
            (name, parameter(arr, name=name)) for name, arr in params.tensors.items()
        )

    def __getitem__(self, name: str):
        return self.nodes[name]

    def all_nodes(self):
        return list(self.nodes.values())


def _glorot(rng, fan_in: int, fan_out: int, dtype):
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return (rng.standard_normal((fan_in, fan_out)) * std).astype(dtype)


def init_params(config: MtpConfig, d_mol: int, d_pro: int,
                dtype=np.float32) -> MtpParams:
    cfg = config.resolved()
    if d_mol < 1 or d_pro < 1:
        raise ConfigError(f"input widths must be >= 1, got d_mol={d_mol}, d_pro={d_pro}")
    d = cfg.d_model
    hidden = cfg.ffn_width()
    half = max(d // 2, 1)
    rng = np.random.default_rng(cfg.seed)
    t: "OrderedDict[str, np.ndarray]" = OrderedDict()

    def zeros(shape):
        return np.zeros(shape, dtype=dtype)

    t["proj_mol.w"] = _glorot(rng, d_mol, d, dtype)
    t["proj_mol.b"] = zeros((1, d))
    t["proj_pro.w"] = _glorot(rng, d_pro, d, dtype)
    t["proj_pro.b"] = zeros((1, d))

    t["mts.cond.w"] = _glorot(rng, d, 6 * d, dtype)
    # Identity conditioning at init: gamma blocks start at 1, beta blocks
    # at 0 (all-zero under one-plus-gamma, which folds the 1 in itself).
    bias = np.zeros((1, 6 * d), dtype=dtype)
    if cfg.adaln_style == "direct":
        for i in (0, 2, 4):
            bias[0, i * d:(i + 1) * d] = 1.0
    t["mts.cond.b"] = bias

    for w in ("wq", "wk", "wv", "wo"):
        t[f"mts.attn.{w}"] = _glorot(rng, d, d, dtype)
    t["mts.ffn.w1"] = _glorot(rng, d, hidden, dtype)
    t["mts.ffn.b1"] = zeros((1, hidden))
    t["mts.ffn.w2"] = _glorot(rng, hidden, d, dtype)
    t["mts.ffn.b2"] = zeros((1, d))

    for layer in range(cfg.n_layers):
        for w in ("wq", "wk", "wv"):
            t[f"mps.{layer}.{w}"] = _glorot(rng, d, d, dtype)
        # Zero output projection: a fresh cross-attention layer contributes
        # an exactly-zero residual until training moves it.
        t[f"mps.{layer}.wo"] = zeros((d, d))
    for layer in range(cfg.n_layers):
        t[f"ffn.{layer}.w1"] = _glorot(rng, d, hidden, dtype)
        t[f"ffn.{layer}.b1"] = zeros((1, hidden))
        t[f"ffn.{layer}.w2"] = _glorot(rng, hidden, d, dtype)
        t[f"ffn.{layer}.b2"] = zeros((1, d))

    t["head.w1"] = _glorot(rng, d, half, dtype)
    t["head.b1"] = zeros((1, half))
    t["head.w2"] = _glorot(rng, half, 1, dtype)
    t["head.b2"] = zeros((1, 1))

    return MtpParams(t, cfg, d_mol, d_pro)


def check_same_shapes(a: MtpParams, b: MtpParams):
    if a.names() != b.names():
        raise ShapeError("parameter sets name different tensors")
    for name in a.names():
        if a[name].shape != b[name].shape:
            raise ShapeError(
                f"tensor {name}: shapes differ, {a[name].shape} vs {b[name].shape}"
            )
