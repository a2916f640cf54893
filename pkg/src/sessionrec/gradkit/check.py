"""Finite-difference gradient checking for tape-built scalar functions."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, backward

REL_ERR_FLOOR = 1e-8


def grad_check(
    f: Callable[..., Tensor],
    args: Sequence[Tensor],
    h: float = 1e-5,
) -> float:
    """Compare analytic gradients of ``f(*args)`` against central differences.

    ``f`` must rebuild its graph from the given leaf tensors on every call
    (define-by-run), because each coordinate is perturbed in place, re-evaluated
    at +/- h, and restored. Returns the worst relative error
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over every
    coordinate of every argument.
    """
    out = f(*args)
    if out.values.size != 1:
        raise ShapeError(f"grad_check needs a scalar function, got shape {out.shape}")
    analytic = backward(out, wrt=list(args))
    worst = 0.0
    for arg, grad in zip(args, analytic):
        base = arg.values
        it = np.nditer(base, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            saved = base[idx]
            base[idx] = saved + h
            f_plus = f(*args).item()
            base[idx] = saved - h
            f_minus = f(*args).item()
            base[idx] = saved
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(grad[idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), REL_ERR_FLOOR)
            worst = max(worst, err)
    return worst
