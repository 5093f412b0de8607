"""Minimal numerical kernel: float64 tensors, reverse-mode autodiff, Adam."""

from .autodiff import (
    Graph,
    NonFiniteError,
    ShapeError,
    Tensor,
    add,
    attn_context,
    attn_scores,
    backward,
    concat,
    constant,
    conv1d_maxpool,
    cross_entropy_logits,
    embedding,
    lstm_cell,
    matmul,
    mean_all,
    mul,
    neg,
    no_grad,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax_tau,
    stack_steps,
    sub,
    sum_all,
    tanh,
)
from .checkpoint import MAGIC, CheckpointError, load_arrays, load_into_store, save_arrays, save_store
from .params import AdamConfig, MissingGradientError, ParamStore, adam_step, clip_by_global_norm

__all__ = [
    "Graph",
    "NonFiniteError",
    "ShapeError",
    "Tensor",
    "add",
    "attn_context",
    "attn_scores",
    "backward",
    "concat",
    "constant",
    "conv1d_maxpool",
    "cross_entropy_logits",
    "embedding",
    "lstm_cell",
    "matmul",
    "mean_all",
    "mul",
    "neg",
    "no_grad",
    "relu",
    "reshape",
    "scale",
    "sigmoid",
    "softmax_tau",
    "stack_steps",
    "sub",
    "sum_all",
    "tanh",
    "MAGIC",
    "CheckpointError",
    "load_arrays",
    "load_into_store",
    "save_arrays",
    "save_store",
    "AdamConfig",
    "MissingGradientError",
    "ParamStore",
    "adam_step",
    "clip_by_global_norm",
]
