"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import NumericsError, Tensor, backward, zero_grad


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    worst_index: int
    n_checked: int
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.max_rel_error < self.tolerance


def finite_diff_check(f, params: list[Tensor], epsilon: float = 1e-6,
                      tolerance: float = 1e-4, names: list[str] | None = None) -> GradCheckReport:
    """Compare analytic gradients of f() against central differences.

    f is a zero-argument callable returning a scalar Tensor and closing over
    ``params``; it is evaluated twice up front to detect nondeterminism.
    Relative error per coordinate is |a - n| / max(1, |a|, |n|).
    """
    if not (1e-7 <= epsilon <= 1e-3):
        raise NumericsError(f"epsilon {epsilon} outside [1e-7, 1e-3]")
    v1 = f().item()
    v2 = f().item()
    if v1 != v2:
        raise NumericsError(f"f is not deterministic: {v1!r} != {v2!r}")

    zero_grad(params)
    loss = f()
    backward(loss)
    analytic = [np.zeros_like(p.array) if p.grad is None else p.grad.copy() for p in params]
    zero_grad(params)

    names = names or [f"param{i}" for i in range(len(params))]
    max_rel = 0.0
    worst = (names[0] if names else "", -1)
    checked = 0
    for p, a_grad, name in zip(params, analytic, names):
        flat = p.array.reshape(-1)
        a_flat = a_grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = f().item()
            flat[i] = orig - epsilon
            down = f().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * epsilon)
            rel = abs(a_flat[i] - numeric) / max(1.0, abs(a_flat[i]), abs(numeric))
            checked += 1
            if rel > max_rel:
                max_rel = rel
                worst = (name, i)
    return GradCheckReport(max_rel_error=max_rel, worst_param=worst[0],
                           worst_index=worst[1], n_checked=checked, tolerance=tolerance)
