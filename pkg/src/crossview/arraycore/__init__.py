"""Differentiable dense-array engine: tape, primitives, finite-difference checks."""

from .engine import OP_TABLE, Array, Tape, active_tape, apply, backward
from .gradcheck import default_step, grad_check
from .ops import (
    add,
    concat,
    conv2d,
    div,
    exp,
    gelu,
    global_avg_pool,
    l2_normalize,
    layer_norm,
    linear,
    log,
    log_softmax,
    matmul,
    mean,
    mul,
    neg,
    relu,
    repeat_leading,
    reshape,
    softmax,
    sqrt,
    sub,
    sum_,
    take,
    transpose,
)

__all__ = [
    "OP_TABLE",
    "Array",
    "Tape",
    "active_tape",
    "apply",
    "backward",
    "default_step",
    "grad_check",
    "add",
    "concat",
    "conv2d",
    "div",
    "exp",
    "gelu",
    "global_avg_pool",
    "l2_normalize",
    "layer_norm",
    "linear",
    "log",
    "log_softmax",
    "matmul",
    "mean",
    "mul",
    "neg",
    "relu",
    "repeat_leading",
    "reshape",
    "softmax",
    "sqrt",
    "sub",
    "sum_",
    "take",
    "transpose",
]
