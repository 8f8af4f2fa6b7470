"""Closed-form capacity, sample-complexity and approximator-size calculators.

Every hidden big-O constant is an explicit ``BoundConfig`` field. Logarithms
are natural except where a base-2 logarithm is written into the bound (the
fat-shattering scale factor and the truncation level).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .besov import truncation_level_for

_LOGS = {"e": math.log, "2": math.log2, "10": math.log10}


@dataclass(frozen=True)
class BoundConfig:
    c: float = 1.0
    c1: float = 2.0
    log_base: str = "e"

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError(f"c must be > 0, got {self.c}")
        if not self.c1 > 1:
            raise ValueError(f"c1 must be > 1, got {self.c1}")
        if self.log_base not in _LOGS:
            raise ValueError(f"log_base must be one of {sorted(_LOGS)}, got {self.log_base!r}")

    def log(self, x: float) -> float:
        return _LOGS[self.log_base](x)

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT = BoundConfig()


def dictionary_rank(I: int, alpha: float) -> int:
    """r = I + 3 - ceil(alpha): dictionary entries left free by the smoothness pattern."""
    if I < 1:
        raise ValueError(f"I must be >= 1, got {I}")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if math.ceil(alpha) > I:
        raise ValueError(f"ceil(alpha) = {math.ceil(alpha)} exceeds the spline order I = {I}")
    return I + 3 - math.ceil(alpha)


def _check_arch(L: int, W: int) -> None:
    if L < 1 or W < 1:
        raise ValueError(f"need L, W >= 1, got L={L}, W={W}")


def _capacity(L: int, W: int, r: int, cfg: BoundConfig) -> float:
    return L**2 * W**2 * r * (cfg.log(r * L * W**2) + L)


def pdim_bound(L: int, W: int, I: int, alpha: float, cfg: BoundConfig = DEFAULT) -> float:
    """c L^2 W^2 r (log(L W^2 r) + L)."""
    _check_arch(L, W)
    return cfg.c * _capacity(L, W, dictionary_rank(I, alpha), cfg)


def fat_shattering_bound(
    gamma: float, L: int, W: int, I: int, alpha: float, d: int, cfg: BoundConfig = DEFAULT
) -> float:
    """c log2(1/(8 gamma))^2 r L^2 W^2 (log(r L W^2) + L) + (8 gamma)^(-(d+1)/alpha)."""
    if not 0 < gamma < 0.125:
        raise ValueError(f"gamma must lie in (0, 1/8), got {gamma}")
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    _check_arch(L, W)
    r = dictionary_rank(I, alpha)
    return cfg.c * math.log2(1.0 / (8.0 * gamma)) ** 2 * _capacity(L, W, r, cfg) + (8.0 * gamma) ** (
        -(d + 1) / alpha
    )


@dataclass(frozen=True)
class SampleComplexity:
    N: float
    A: float
    B: float


def sample_complexity_terms(
    eps: float, delta: float, L: int, W: int, I: int, alpha: float, d: int, cfg: BoundConfig = DEFAULT
) -> SampleComplexity:
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    _check_arch(L, W)
    r = dictionary_rank(I, alpha)
    A = cfg.c * math.log2(4.0 / eps) ** 2 * _capacity(L, W, r, cfg)
    B = (4.0 / eps) ** ((d + 1) / alpha)
    AB = A + B
    N = cfg.c1 / eps**2 * (AB * cfg.log(AB / eps) ** 2 + cfg.log(1.0 / delta))
    return SampleComplexity(N, A, B)


def sample_complexity(
    eps: float, delta: float, L: int, W: int, I: int, alpha: float, d: int, cfg: BoundConfig = DEFAULT
) -> float:
    """(c1/eps^2) [(A+B) log^2((A+B)/eps) + log(1/delta)]."""
    return sample_complexity_terms(eps, delta, L, W, I, alpha, d, cfg).N


def generalization_certificate(
    N: float, eps: float, L: int, W: int, I: int, alpha: float, d: int, cfg: BoundConfig = DEFAULT
) -> float:
    """min(1, exp(-c N eps^2 + (d+1) log^2((d+1)/eps))), a bound on the failure probability.

    The architecture arguments only enter through the sample size N one
    plugs in; they are validated so that calls mirror ``sample_complexity``.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    _check_arch(L, W)
    dictionary_rank(I, alpha)
    exponent = -cfg.c * N * eps**2 + (d + 1) * cfg.log((d + 1) / eps) ** 2
    return 1.0 if exponent >= 0 else math.exp(exponent)


def effective_smoothness(alpha: float, n: float, d: int, p: float) -> float:
    """alpha* = alpha - (n - d)/p for an n-regular set in R^d, d - 1 < n < d."""
    if not d - 1 < n < d:
        raise ValueError(f"n must lie in ({d - 1}, {d}), got {n}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return alpha - (n - d) / p


@dataclass(frozen=True)
class ApproximatorSize:
    width: int
    depth: int
    params: int
    K: int


def approximator_size(eps: float, alpha_star: float, s: float, d: int) -> ApproximatorSize:
    """Width (d+4)(2^(K+1)-2), depth 2d-1, parameters (d^2+35d-35)(2^(K+1)-1)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    K = truncation_level_for(eps, alpha_star, s)
    return ApproximatorSize(
        width=(d + 4) * (2 ** (K + 1) - 2),
        depth=2 * d - 1,
        params=(d * d + 35 * d - 35) * (2 ** (K + 1) - 1),
        K=K,
    )
