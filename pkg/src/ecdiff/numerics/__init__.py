"""Tensor arithmetic with reverse-mode autodiff, Adam, seeded RNG, gradient checking."""

from .gradcheck import GradCheckReport, finite_diff_check
from .optim import AdamState, adam_step
from .rng import SeededRng, mix64
from .tensor import (
    NumericsError,
    Tensor,
    add,
    backward,
    concat,
    embedding_lookup,
    gelu,
    layernorm,
    matmul,
    mul,
    no_grad,
    relu,
    reshape,
    softmax,
    sub,
    tabs,
    take,
    texp,
    tmax,
    tmean,
    tmin,
    tsqrt,
    tsum,
    transpose,
    zero_grad,
)

__all__ = [
    "NumericsError",
    "Tensor",
    "SeededRng",
    "mix64",
    "AdamState",
    "adam_step",
    "GradCheckReport",
    "finite_diff_check",
    "no_grad",
    "backward",
    "zero_grad",
    "add",
    "sub",
    "mul",
    "matmul",
    "concat",
    "reshape",
    "transpose",
    "take",
    "embedding_lookup",
    "tsum",
    "tmean",
    "tmin",
    "tmax",
    "tabs",
    "relu",
    "gelu",
    "texp",
    "tsqrt",
    "softmax",
    "layernorm",
]
