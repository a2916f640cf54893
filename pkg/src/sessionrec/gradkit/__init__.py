"""A small reverse-mode autodiff tape with Adam, gradient checking, and checkpoints."""

from .check import grad_check
from .checkpoint import CHECKPOINT_VERSION, load_params, save_params
from .params import GROUPS, ParamSpec, ParamStore, adam_step, init_params
from .tensor import (
    Tensor,
    add,
    backward,
    clip,
    concat,
    div,
    exp,
    leaky_relu,
    log,
    matmul,
    mean,
    mul,
    neg,
    reshape,
    sigmoid,
    slice_rows,
    softmax,
    sub,
    sum,
    tanh,
    tape,
    transpose,
)

__all__ = [
    "CHECKPOINT_VERSION",
    "GROUPS",
    "ParamSpec",
    "ParamStore",
    "Tensor",
    "adam_step",
    "add",
    "backward",
    "clip",
    "concat",
    "div",
    "exp",
    "grad_check",
    "init_params",
    "leaky_relu",
    "load_params",
    "log",
    "matmul",
    "mean",
    "mul",
    "neg",
    "reshape",
    "save_params",
    "sigmoid",
    "slice_rows",
    "softmax",
    "sub",
    "sum",
    "tanh",
    "tape",
    "transpose",
]
