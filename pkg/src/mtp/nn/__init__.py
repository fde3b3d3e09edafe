from .autodiff import (
    DiffNode,
    FeatureMatrix,
    add,
    as_matrix,
    as_node,
    attn_mix,
    avg_pool_rows,
    backward,
    concat_cols,
    concat_rows,
    constant,
    dropout,
    layer_norm_core,
    linear,
    matmul,
    mul,
    parameter,
    relu,
    scale,
    slice_cols,
    softmax_rows,
    softplus,
    square,
    sub,
    sum_all,
    take_rows,
    transpose,
)
from .gradcheck import finite_difference, max_relative_error

__all__ = [
    "DiffNode",
    "FeatureMatrix",
    "add",
    "as_matrix",
    "as_node",
    "attn_mix",
    "avg_pool_rows",
    "backward",
    "concat_cols",
    "concat_rows",
    "constant",
    "dropout",
    "finite_difference",
    "layer_norm_core",
    "linear",
    "matmul",
    "max_relative_error",
    "mul",
    "parameter",
    "relu",
    "scale",
    "slice_cols",
    "softmax_rows",
    "softplus",
    "square",
    "sub",
    "sum_all",
    "take_rows",
    "transpose",
]
