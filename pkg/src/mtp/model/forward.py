"""Forward pass of the dual-grained conditioning stack.

Pipeline, all matrices projected to d_model first:

    F0 = macro block(F_mol | target)        coarse conditioning
    for each layer l:                        fine conditioning
        F  = F + cross_attention(F, pocket)  (residual delta)
        F  = F + FFN(LN(F))                  (if FFN enabled)
    y  = head(mean-pool(F))

The macro block is a pre-norm self-attention block whose three
normalizations are modulated by (gamma, beta) pairs regressed from the
pooled target; with conditioning disabled those normalizations fall back
to plain LayerNorm and the block is an ordinary transformer encoder layer.
With every FFN disabled the stack decomposes exactly into the macro term
plus the sum of per-layer cross-attention deltas.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DataError
from ..nn.autodiff import (
    DiffNode,
    add,
    as_matrix,
    attn_mix,
    avg_pool_rows,
    concat_cols,
    concat_rows,
    constant,
    dropout,
    layer_norm_core,
    linear,
    matmul,
    mul,
    relu,
    scale,
    slice_cols,
    softmax_rows,
    take_rows,
    transpose,
)
from .attention import AttentionRecord
from .config import MtpConfig
from .params import MtpParams, ParamNodes


def feature_abstractor(f_target: DiffNode) -> DiffNode:
    """Compress a target matrix (n x d) to one pooled row (1 x d)."""
    return avg_pool_rows(f_target)


def weight_regressor(f_compress: DiffNode, w, b):
    """Map the pooled target row to six conditioning rows.

    Output columns split, in order, into gamma1, beta1, gamma2, beta2,
    gamma3, beta3 -- one (gamma, beta) pair per conditioned normalization.
    """
    full = linear(f_compress, w, b)
    d = full.value.shape[1] // 6
    parts = tuple(slice_cols(full, i * d, (i + 1) * d) for i in range(6))
    return parts


def adaln(x: DiffNode, gamma, beta, style: str = "direct") -> DiffNode:
    """LayerNorm modulated by conditioning rows: LN(x) * gamma + beta.

    Under "one-plus-gamma" the scale is (1 + gamma), so a zero-initialized
    regressor starts at the identity modulation.
    """
    h = layer_norm_core(x)
    if style == "one-plus-gamma":
        gamma = add(gamma, constant(np.ones((1, h.value.shape[1]), dtype=h.value.dtype)))
    return add(mul(h, gamma), beta)


def _attention(q_src: DiffNode, kv_src: DiffNode, pn, prefix: str, cfg: MtpConfig,
               record: AttentionRecord | None, kind: str, layer: int,
               mol_keys: int) -> DiffNode:
    """Scaled dot-product attention, multi-head by column split."""
    q = matmul(q_src, pn[f"{prefix}.wq"])
    k = matmul(kv_src, pn[f"{prefix}.wk"])
    v = matmul(kv_src, pn[f"{prefix}.wv"])
    d_k = cfg.d_model // cfg.n_heads
    heads = []
    for h in range(cfg.n_heads):
        lo, hi = h * d_k, (h + 1) * d_k
        qh = slice_cols(q, lo, hi) if cfg.n_heads > 1 else q
        kh = slice_cols(k, lo, hi) if cfg.n_heads > 1 else k
        vh = slice_cols(v, lo, hi) if cfg.n_heads > 1 else v
        scores = scale(matmul(qh, transpose(kh)), 1.0 / math.sqrt(d_k))
        attn = softmax_rows(scores)
        if record is not None:
            record.add(kind, layer, h, attn.value, mol_keys)
        heads.append(attn_mix(attn, vh))
    merged = heads[0] if cfg.n_heads == 1 else concat_cols(heads)
    return matmul(merged, pn[f"{prefix}.wo"])


def _ffn(x: DiffNode, pn, prefix: str, cfg: MtpConfig, mode: str, rng) -> DiffNode:
    h = relu(linear(x, pn[f"{prefix}.w1"], pn[f"{prefix}.b1"]))
    h = dropout(h, cfg.dropout_p, mode, rng)
    return linear(h, pn[f"{prefix}.w2"], pn[f"{prefix}.b2"])


def _macro_block(f_mol: DiffNode, cond, pn, cfg: MtpConfig, mode: str, rng,
                 record: AttentionRecord | None) -> DiffNode:
    """Pre-norm self-attention block with optionally conditioned norms.

    cond is either None (plain LayerNorm everywhere) or the six rows from
    weight_regressor in (gamma1, beta1, gamma2, beta2, gamma3, beta3) order.
    """

    def norm(x, which):
        if cond is None:
            return layer_norm_core(x)
        gamma, beta = cond[2 * which], cond[2 * which + 1]
        return adaln(x, gamma, beta, cfg.adaln_style)

    m = f_mol.value.shape[0]
    h = norm(f_mol, 0)
    sa = _attention(h, h, pn, "mts.attn", cfg, record, "self", 0, mol_keys=m)
    x = add(f_mol, sa)
    if cfg.enable_ffn:
        x = add(x, _ffn(norm(x, 1), pn, "mts.ffn", cfg, mode, rng))
    return norm(x, 2)


def mts_forward(f_mol: DiffNode, f_target: DiffNode, pn, cfg: MtpConfig,
                mode: str = "eval", rng=None,
                record: AttentionRecord | None = None) -> DiffNode:
    """Macro block: target-conditioned self-attention over molecule rows.

    Both inputs must already be projected to d_model.
    """
    compress = feature_abstractor(f_target)
    cond = weight_regressor(compress, pn["mts.cond.w"], pn["mts.cond.b"])
    return _macro_block(f_mol, cond, pn, cfg, mode, rng, record)


def pocket_select(f_target: DiffNode, indices, target_id: str | None = None) -> DiffNode:
    """Gather pocket rows from the target matrix, keeping index order."""
    who = f" for target {target_id!r}" if target_id else ""
    idx = np.asarray(indices)
    if idx.size == 0:
        raise DataError(f"empty pocket index list{who}")
    if idx.ndim != 1 or not np.issubdtype(idx.dtype, np.integer):
        raise DataError(f"pocket indices must be a flat list of integers{who}")
    n = f_target.value.shape[0]
    bad = [int(i) for i in idx if i < 0 or i >= n]
    if bad:
        raise DataError(
            f"pocket indices out of range{who}: {bad} (target has {n} rows)"
        )
    uniq, counts = np.unique(idx, return_counts=True)
    if uniq.size != idx.size:
        dupes = [int(u) for u, c in zip(uniq, counts) if c > 1]
        raise DataError(f"duplicate pocket indices{who}: {dupes}")
    return take_rows(f_target, idx)


def mps_forward(f_mol: DiffNode, f_pocket: DiffNode, pn, layer: int,
                cfg: MtpConfig, mode: str = "eval", rng=None,
                record: AttentionRecord | None = None) -> DiffNode:
    """Micro step: cross-attention from molecule rows into pocket rows.

    Returns the residual delta (not the sum), so stacking is explicit at
    the call site. Queries come from the molecule; keys and values come
    from the pocket, or from [molecule; pocket] under kv_concat_mol.
    """
    if f_pocket.value.shape[0] == 0:
        raise DataError("mps_forward: pocket has no rows")
    m = f_mol.value.shape[0]
    if cfg.kv_concat_mol:
        kv = concat_rows(f_mol, f_pocket)
        mol_keys = m
    else:
        kv = f_pocket
        mol_keys = 0
    return _attention(f_mol, kv, pn, f"mps.{layer}", cfg, record,
                      "cross", layer + 1, mol_keys=mol_keys)


def mtp_forward(f_mol, f_target, pocket_indices, params, cfg: MtpConfig | None = None,
                mode: str = "eval", rng=None, target_id: str | None = None,
                record: AttentionRecord | None = None) -> DiffNode:
    """Full stack: project inputs, run the macro block, then L micro layers.

    `params` is an MtpParams or a ParamNodes view; raw input matrices are
    cast to the parameter dtype.
    """
    pn = params.node_view() if isinstance(params, MtpParams) else params
    cfg = (cfg or pn.params.config).resolved()
    dtype = pn["proj_mol.w"].value.dtype

    f_mol = constant(as_matrix(f_mol, dtype=dtype))
    mol = linear(f_mol, pn["proj_mol.w"], pn["proj_mol.b"])

    need_target = cfg.enable_mts or cfg.enable_mps
    tgt = None
    if need_target:
        f_target = constant(as_matrix(f_target, dtype=dtype))
        tgt = linear(f_target, pn["proj_pro.w"], pn["proj_pro.b"])

    if cfg.enable_mts:
        x = mts_forward(mol, tgt, pn, cfg, mode, rng, record)
    else:
        x = _macro_block(mol, None, pn, cfg, mode, rng, record)

    pocket = None
    if cfg.enable_mps:
        pocket = pocket_select(tgt, pocket_indices, target_id=target_id)

    for layer in range(cfg.n_layers):
        if cfg.enable_mps:
            x = add(x, mps_forward(x, pocket, pn, layer, cfg, mode, rng, record))
        if cfg.enable_ffn:
            x = add(x, _ffn(layer_norm_core(x), pn, f"ffn.{layer}", cfg, mode, rng))
    return x


def predict(f_out: DiffNode, pn, cfg: MtpConfig) -> DiffNode:
    """Pool token rows and read out one scalar (raw value for regression,
    logit for classification; the sigmoid lives in metrics/serving)."""
    pooled = avg_pool_rows(f_out)
    h = relu(linear(pooled, pn["head.w1"], pn["head.b1"]))
    return linear(h, pn["head.w2"], pn["head.b2"])


def forward_pass(f_mol, f_target, pocket_indices, params, cfg: MtpConfig | None = None,
                 mode: str = "eval", rng=None, target_id: str | None = None,
                 with_record: bool = False):
    """Convenience wrapper: returns (prediction node, attention record)."""
    pn = params.node_view() if isinstance(params, MtpParams) else params
    cfg = (cfg or pn.params.config).resolved()
    record = AttentionRecord() if with_record else None
    x = mtp_forward(f_mol, f_target, pocket_indices, pn, cfg, mode, rng,
                    target_id=target_id, record=record)
    return predict(x, pn, cfg), record
