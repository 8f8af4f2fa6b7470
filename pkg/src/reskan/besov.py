"""Dyadic spline expansions on [0, 1]^d and Besov-type norms.

An expansion is ``f = sum_k sum_j beta_{j,k} N_I(2^k x - j)`` (tensorised over
coordinates), stored level by level. The spline quasi-norm, truncation
bookkeeping and a hierarchical least-squares fitter act on that object; the
modulus-of-smoothness estimator works directly on grid samples.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Iterable

import numpy as np

from .gadgets import assemble_parallel, compile_mra_spline
from .network import ResKanNetwork
from .splines import DyadicIndex, eval_cardinal, eval_cardinal_derivative

RIDGE = 1e-10


@dataclass(frozen=True)
class BesovParams:
    alpha: float
    p: float = 2.0
    q: float = 2.0

    def __post_init__(self) -> None:
        for name in ("alpha", "p", "q"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and > 0, got {v}")


@dataclass
class FitReport:
    levels: list[int] = field(default_factory=list)
    samples: list[int] = field(default_factory=list)
    unknowns: list[int] = field(default_factory=list)
    ranks: list[int] = field(default_factory=list)
    regularized: list[bool] = field(default_factory=list)
    residual_rms: list[float] = field(default_factory=list)

    @property
    def any_regularized(self) -> bool:
        return any(self.regularized)


@dataclass
class SplineExpansion:
    d: int
    order: int
    levels: dict[int, dict[tuple[int, ...], float]] = field(default_factory=dict)
    report: FitReport | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        for k, coeffs in self.levels.items():
            if k < 0:
                raise ValueError(f"level keys must be >= 0, got {k}")
            for j, v in coeffs.items():
                if len(j) != self.d:
                    raise ValueError(f"shift {j} at level {k} does not have length {self.d}")
                if not math.isfinite(v):
                    raise ValueError(f"coefficient at level {k}, shift {j} is not finite")

    @property
    def max_level(self) -> int:
        return max(self.levels, default=-1)

    def items(self) -> Iterable[tuple[int, tuple[int, ...], float]]:
        for k in sorted(self.levels):
            for j in sorted(self.levels[k]):
                yield k, j, self.levels[k][j]

    def scaled(self, c: float) -> "SplineExpansion":
        return SplineExpansion(
            self.d, self.order, {k: {j: c * v for j, v in lv.items()} for k, lv in self.levels.items()}
        )

    def __call__(self, x) -> np.ndarray:
        return evaluate_expansion(self, x)


def evaluate_expansion(e: SplineExpansion, x) -> np.ndarray:
    """Pointwise value at ``x`` of shape (n, d) (or (n,) when d = 1)."""
    xa = np.asarray(x, dtype=np.float64)
    if e.d == 1 and (xa.ndim == 1 or xa.ndim == 0):
        xa = xa.reshape(-1, 1)
    if xa.shape[-1] != e.d:
        raise ValueError(f"points have dimension {xa.shape[-1]}, expansion has {e.d}")
    out = np.zeros(xa.shape[0])
    for k, lv in e.levels.items():
        scaled = 2.0**k * xa
        for j, v in lv.items():
            out += v * np.prod(eval_cardinal(e.order, scaled - np.asarray(j, dtype=float)), axis=-1)
    return out


def expansion_derivative(e: SplineExpansion, m: int, x) -> np.ndarray:
    """m-th derivative of a univariate expansion: sum beta 2^{km} N_I^(m)(2^k x - j)."""
    if e.d != 1:
        raise ValueError("derivatives are only available for univariate expansions")
    if m == 0:
        return evaluate_expansion(e, x)
    xa = np.asarray(x, dtype=np.float64).reshape(-1)
    out = np.zeros_like(xa)
    for k, j, v in e.items():
        out += v * 2.0 ** (k * m) * np.asarray(eval_cardinal_derivative(e.order, m, 2.0**k * xa - j[0]))
    return out


def _level_sums(e: SplineExpansion, p: float, scale: float = 1.0) -> dict[int, float]:
    """sum_j |beta_{j,k} / scale|^p 2^{-kd} for each stored level."""
    return {
        k: sum((abs(v) / scale) ** p for v in lv.values()) * 2.0 ** (-k * e.d) for k, lv in e.levels.items()
    }


def spline_quasi_norm(e: SplineExpansion, params: BesovParams, levels: Iterable[int] | None = None) -> float:
    """(sum_k 2^{alpha k q} (sum_j |beta_{j,k}|^p 2^{-kd})^{q/p})^{1/q}."""
    a, p, q = params.alpha, params.p, params.q
    # factor out the largest coefficient so p-th powers neither underflow nor overflow
    scale = max((abs(v) for _, _, v in e.items()), default=0.0)
    if scale == 0.0:
        return 0.0
    sums = _level_sums(e, p, scale)
    keep = sums.keys() if levels is None else set(levels) & sums.keys()
    total = sum(2.0 ** (a * k * q) * sums[k] ** (q / p) for k in keep)
    return scale * total ** (1.0 / q)


def tail_quasi_norm(e: SplineExpansion, K: int, params: BesovParams) -> float:
    """Quasi-norm of the levels dropped by truncation at ``K``."""
    return spline_quasi_norm(e, params, levels=[k for k in e.levels if k > K])


def truncation_level_for(eps: float, alpha: float, s: float) -> int:
    """K = ceil(log2(eps) / (alpha - s) - 1), clamped at 0."""
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    if not s > alpha:
        raise ValueError(f"need s > alpha for a decaying rate, got s={s}, alpha={alpha}")
    raw = math.log2(eps) / (alpha - s) - 1.0
    # guard against log2 round-off pushing an exact integer over the ceiling
    K = math.ceil(raw - 1e-12)
    return max(K, 0)


@dataclass(frozen=True)
class Truncation:
    expansion: SplineExpansion
    predicted_error: float
    constant_hint: float


def truncate_expansion(e: SplineExpansion, K: int, params: BesovParams, s: float) -> Truncation:
    """Drop levels above ``K``; predict the B^alpha error C_{alpha,s,q} 2^{(alpha-s)(K+1)}.

    ``C`` is measured as ``sup_k 2^{sk} (level sum)^{1/p}`` over all stored
    levels, so the prediction bounds the dropped tail whenever the stored
    coefficients decay at least like 2^{-sk}.
    """
    if K < 0:
        raise ValueError(f"K must be >= 0, got {K}")
    if not s > params.alpha:
        raise ValueError(f"need s > alpha, got s={s}, alpha={params.alpha}")
    a, p, q = params.alpha, params.p, params.q
    sums = _level_sums(e, p)
    C = max((2.0 ** (s * k) * v ** (1.0 / p) for k, v in sums.items()), default=0.0)
    hint = C / (1.0 - 2.0 ** (q * (a - s))) ** (1.0 / q)
    kept = SplineExpansion(e.d, e.order, {k: dict(lv) for k, lv in e.levels.items() if k <= K})
    return Truncation(kept, hint * 2.0 ** ((a - s) * (K + 1)), hint)


def level_shifts(k: int, order: int) -> range:
    """Shifts j whose support [j, j+I+1] / 2^k meets the open unit interval."""
    return range(-order, 2**k)


def _design_1d(order: int, k: int, grid: np.ndarray) -> np.ndarray:
    shifts = np.asarray(level_shifts(k, order), dtype=float)
    return np.asarray(eval_cardinal(order, 2.0**k * grid[:, None] - shifts[None, :]))


def _sample(f: Callable, grid: np.ndarray, d: int) -> np.ndarray:
    if d == 1:
        return np.asarray(f(grid), dtype=np.float64).reshape(-1)
    mesh = np.stack(np.meshgrid(*([grid] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return np.asarray(f(mesh), dtype=np.float64).reshape(-1)


def fit_spline_expansion(
    f: Callable,
    K: int,
    order: int,
    grid_per_level: int = 4,
    d: int = 1,
) -> SplineExpansion:
    """Hierarchical residual least squares, level 0 up to ``K``.

    Level k is fitted to the residual of levels < k on a uniform grid of
    ``grid_per_level * 2^k`` points per axis. ``f`` takes an (n,) array when
    d = 1 and an (n, d) array otherwise. Rank-deficient levels are solved with
    a 1e-10 ridge and flagged in ``result.report``.
    """
    if K < 0:
        raise ValueError(f"K must be >= 0, got {K}")
    if (d == 1 and K > 8) or (d == 2 and K > 4) or d > 2:
        raise ValueError(f"fit too large: d={d}, K={K} (limits: K <= 8 for d=1, K <= 4 for d=2)")
    if grid_per_level < 1:
        raise ValueError("grid_per_level must be >= 1")
    e = SplineExpansion(d, order)
    report = FitReport()
    for k in range(K + 1):
        n = grid_per_level * 2**k
        grid = np.linspace(0.0, 1.0, n)
        target = _sample(f, grid, d)
        if e.levels:
            target = target - _sample(e, grid, d)
        B1 = _design_1d(order, k, grid)
        B = B1
        for _ in range(d - 1):
            B = np.einsum("ia,jb->ijab", B, B1).reshape(B.shape[0] * B1.shape[0], -1)
        coef, _, rank, _ = np.linalg.lstsq(B, target, rcond=None)
        regularized = rank < B.shape[1]
        if regularized:
            coef = np.linalg.solve(B.T @ B + RIDGE * np.eye(B.shape[1]), B.T @ target)
        shifts = list(itertools.product(level_shifts(k, order), repeat=d))
        e.levels[k] = {j: float(c) for j, c in zip(shifts, coef)}
        resid = target - B @ coef
        report.levels.append(k)
        report.samples.append(B.shape[0])
        report.unknowns.append(B.shape[1])
        report.ranks.append(int(rank))
        report.regularized.append(bool(regularized))
        report.residual_rms.append(float(np.sqrt(np.mean(resid**2))))
    e.report = report
    return e


def expansion_network(e: SplineExpansion, tol: float = 0.0) -> ResKanNetwork:
    """Parallel stack of dyadic spline networks weighted by the coefficients.

    Coefficients with magnitude <= ``tol`` are skipped (they do not belong to
    the active index sets).
    """
    nets, weights = [], []
    for k, j, v in e.items():
        if abs(v) > tol:
            nets.append(compile_mra_spline(e.d, e.order, DyadicIndex(k, j)))
            weights.append(v)
    if not nets:
        return ResKanNetwork((), np.zeros((1, e.d)), np.zeros(1), order=e.order)
    return assemble_parallel(nets, weights)


def write_expansion(e: SplineExpansion, path) -> None:
    """Text file: a header line, then one ``k j_1 ... j_d beta`` line per coefficient."""
    from .utils import atomic_write_text

    lines = [f"# reskan-expansion/v1 d={e.d} I={e.order} K={e.max_level}"]
    lines += [" ".join([str(k), *map(str, j), repr(float(v))]) for k, j, v in e.items()]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_expansion(path) -> SplineExpansion:
    with open(path, encoding="utf-8") as fh:
        text = fh.read().splitlines()
    if not text or not text[0].startswith("# reskan-expansion/v1"):
        raise ValueError(f"{path}: line 1: missing '# reskan-expansion/v1' header")
    try:
        fields = dict(tok.split("=", 1) for tok in text[0].split()[2:])
        d, order = int(fields["d"]), int(fields["I"])
    except (KeyError, ValueError):
        raise ValueError(f"{path}: line 1: header must carry d=, I= and K=") from None
    levels: dict[int, dict[tuple[int, ...], float]] = {}
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        toks = line.split()
        if len(toks) != d + 2:
            raise ValueError(f"{path}: line {lineno}: expected {d + 2} fields, got {len(toks)}")
        try:
            k = int(toks[0])
            j = tuple(int(t) for t in toks[1 : d + 1])
            v = float(toks[-1])
        except ValueError:
            raise ValueError(f"{path}: line {lineno}: malformed entry {line!r}") from None
        levels.setdefault(k, {})[j] = v
    return SplineExpansion(d, order, levels)


@dataclass(frozen=True)
class BesovEstimate:
    seminorm: float
    lp_norm: float

    @property
    def total(self) -> float:
        return self.seminorm + self.lp_norm


def _grid_values(f, grid_n: int, d: int) -> np.ndarray:
    if callable(f):
        grid = np.linspace(0.0, 1.0, grid_n)
        return _sample(f, grid, d).reshape((grid_n,) * d)
    vals = np.asarray(f, dtype=np.float64)
    if vals.shape != (grid_n,) * d:
        raise ValueError(f"grid values have shape {vals.shape}, expected {(grid_n,) * d}")
    return vals


def _difference_norms(vals: np.ndarray, r: int, p: float, h: float) -> np.ndarray:
    """L^p norm of the r-th forward difference with step m*h, maximised over axes; index m."""
    n = vals.shape[0]
    d = vals.ndim
    max_m = (n - 1) // r
    out = np.zeros(max_m + 1)
    weights = [(-1) ** (r - i) * comb(r, i) for i in range(r + 1)]
    for axis in range(d):
        v = np.moveaxis(vals, axis, 0)
        for m in range(1, max_m + 1):
            valid = n - r * m
            diff = sum(w * v[i * m : i * m + valid] for i, w in enumerate(weights))
            norm = (h**d * np.sum(np.abs(diff) ** p)) ** (1.0 / p)
            out[m] = max(out[m], norm)
    return out


def besov_estimate(f, params: BesovParams, grid_n: int, d: int = 1) -> BesovEstimate:
    """Modulus-of-smoothness estimate of the B^alpha_{p,q}([0,1]^d) norm.

    omega(t) is the largest grid L^p norm of the ceil(alpha)-th difference over
    axis steps of length <= t; the t-integral is the dyadic sum
    ln2 * sum_m omega(2^-m)^q 2^{m q alpha} over 2^-m >= grid spacing, with
    the saturated range t > 1 summed in closed form.
    """
    if params.p < 1 or params.q < 1:
        raise ValueError("the modulus estimator needs p, q >= 1")
    r = math.ceil(params.alpha)
    if grid_n < 4 * r:
        raise ValueError(f"grid too coarse: grid_n={grid_n} < 4*ceil(alpha)={4 * r}")
    vals = _grid_values(f, grid_n, d)
    h = 1.0 / (grid_n - 1)
    a, p, q = params.alpha, params.p, params.q
    running = np.maximum.accumulate(_difference_norms(vals, r, p, h))
    J = int(math.floor(math.log2(1.0 / h) + 1e-12))
    total = 0.0
    for m in range(J + 1):
        steps = min(int(math.floor(2.0**-m / h + 1e-9)), len(running) - 1)
        total += running[steps] ** q * 2.0 ** (m * q * a)
    total += running[-1] ** q / (2.0 ** (q * a) - 1.0)
    seminorm = (math.log(2.0) * total) ** (1.0 / q)
    lp = float(np.mean(np.abs(vals) ** p) ** (1.0 / p))
    return BesovEstimate(seminorm, lp)


def empirical_besov_norm(f, params: BesovParams, grid_n: int, d: int = 1) -> float:
    return besov_estimate(f, params, grid_n, d).total
