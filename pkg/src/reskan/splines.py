"""Cardinal B-splines with integer knots 0, ..., I+1.

``eval_cardinal`` uses the truncated-power (ReLU^I) representation and is the
evaluator used by networks. ``eval_cardinal_oracle`` is an independent
Cox-de Boor recurrence kept only for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np
import numpy.typing as npt

MAX_ORDER = 8

ArrayLike = npt.ArrayLike


@dataclass(frozen=True)
class DyadicIndex:
    """Resolution level ``k`` and lattice shift ``j`` of a dyadic spline."""

    k: int
    j: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError(f"level k must be non-negative, got {self.k}")
        if len(self.j) < 1:
            raise ValueError("shift j must have length d >= 1")
        object.__setattr__(self, "j", tuple(int(v) for v in self.j))

    @property
    def d(self) -> int:
        return len(self.j)


def _check_order(order: int) -> None:
    if order < 0:
        raise ValueError(f"spline order must be >= 0, got {order}")
    if order > MAX_ORDER:
        raise ValueError(f"spline order {order} exceeds supported maximum {MAX_ORDER}")


@lru_cache(maxsize=None)
def truncated_power_coefficients(order: int, m: int = 0) -> tuple[float, ...]:
    """Weights c_j with N_I^{(m)}(x) = sum_j c_j ReLU(x - j)^(I - m).

    Built as exact rationals (-1)^j C(I+1, j) / (I-m)! before rounding once.
    """
    if m > order:
        return (0.0,) * (order + 2)
    return tuple(
        float(Fraction((-1) ** j * comb(order + 1, j), factorial(order - m)))
        for j in range(order + 2)
    )


def eval_cardinal(order: int, x: ArrayLike) -> np.ndarray | float:
    """Evaluate N_I at ``x`` (scalar or array).

    Order 0 is the half-open indicator of [0, 1). Values outside the support
    are exactly zero.
    """
    _check_order(order)
    xa = np.asarray(x, dtype=np.float64)
    if order == 0:
        out = ((xa >= 0.0) & (xa < 1.0)).astype(np.float64)
    else:
        coeffs = truncated_power_coefficients(order)
        # N_I is symmetric about (I+1)/2; folding onto the left half keeps the
        # truncated powers small and the cancellation mild
        xs = np.minimum(xa, order + 1 - xa)
        out = np.zeros_like(xa)
        for j, c in enumerate(coeffs):
            out += c * np.maximum(xs - j, 0.0) ** order
        out = np.where((xa > 0.0) & (xa < order + 1), out, 0.0)
    return float(out) if out.ndim == 0 else out


def eval_cardinal_oracle(order: int, x: ArrayLike) -> np.ndarray | float:
    """Cox-de Boor recurrence on the knots 0, 1, ..., I+1."""
    _check_order(order)
    xa = np.asarray(x, dtype=np.float64)
    # degree-0 pieces B_{i,0} = 1 on [i, i+1)
    basis = [((xa >= i) & (xa < i + 1)).astype(np.float64) for i in range(order + 1)]
    for p in range(1, order + 1):
        basis = [
            (xa - i) / p * basis[i] + (i + p + 1 - xa) / p * basis[i + 1]
            for i in range(order + 1 - p)
        ]
    out = basis[0]
    return float(out) if out.ndim == 0 else out


def eval_cardinal_derivative(order: int, m: int, x: ArrayLike) -> np.ndarray | float:
    """m-th derivative of N_I from d/dx N_I(x) = N_{I-1}(x) - N_{I-1}(x-1).

    Applying the recurrence m times gives sum_l (-1)^l C(m, l) N_{I-m}(x - l).
    ``m == I`` is allowed and yields the piecewise-constant (right-continuous)
    derivative; ``m > I`` is rejected.
    """
    _check_order(order)
    if m < 0:
        raise ValueError(f"derivative order must be >= 0, got {m}")
    if m > order:
        raise ValueError(f"derivative order {m} exceeds spline order {order}")
    if m == 0:
        return eval_cardinal(order, x)
    xa = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(xa)
    for ell in range(m + 1):
        out = out + (-1) ** ell * comb(m, ell) * np.asarray(eval_cardinal(order - m, xa - ell))
    return float(out) if out.ndim == 0 else out


def eval_tensor(order: int, x: ArrayLike) -> np.ndarray | float:
    """Tensor product prod_k N_I(x_k) over the last axis of ``x``."""
    xa = np.asarray(x, dtype=np.float64)
    if xa.ndim == 0 or xa.shape[-1] < 1:
        raise ValueError("eval_tensor expects a vector (or batch of vectors) with d >= 1")
    vals = np.asarray(eval_cardinal(order, xa))
    out = np.prod(vals, axis=-1)
    return float(out) if out.ndim == 0 else out


def eval_mra(order: int, idx: DyadicIndex, x: ArrayLike) -> np.ndarray | float:
    """Dyadic spline N_I(2^k x - j), tensorised over coordinates."""
    xa = np.asarray(x, dtype=np.float64)
    if xa.shape[-1] != idx.d:
        raise ValueError(f"point dimension {xa.shape[-1]} does not match shift length {idx.d}")
    return eval_tensor(order, 2.0**idx.k * xa - np.asarray(idx.j, dtype=np.float64))
