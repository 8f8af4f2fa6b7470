"""Targets, data, Sobolev-loss training and risk estimates for one-dimensional Res-KANs.

Input derivatives are computed by pushing truncated Taylor jets through the
network: a jet holds the normalised coefficients ``c_m = f^(m)(x) / m!`` for
``m = 0..s``. Every dictionary function is a piecewise polynomial whose
derivatives are known in closed form, so the jet forward pass is exact away
from knots and torch's reverse mode differentiates it with respect to the
parameters.
"""

from __future__ import annotations

import math
import warnings
from math import comb, factorial
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import torch

from .network import ResKanLayer, ResKanNetwork, sparsity_mask

DTYPE = torch.float64
DIVERGENCE_LIMIT = 1e12


class KnotWarning(UserWarning):
    """A derivative was requested at a point where the active basis is not smooth enough."""


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float, history: list):
        super().__init__(f"training diverged at epoch {epoch}: loss {loss:.3e}")
        self.epoch = epoch
        self.loss = loss
        self.history = history


# targets ---------------------------------------------------------------------


def _f_alpha_coeffs(alpha: int, m: int) -> tuple[int, int]:
    """(a, c) with d^m/dx^m x^alpha log x = a x^{alpha-m} log x + c x^{alpha-m}."""
    a, c = 1, 0
    for step in range(m):
        k = alpha - step
        a, c = a * k, a + c * k
    return a, c


def target_f_alpha(alpha: int, x):
    """x^alpha log(x) / alpha!, extended by 0 at x = 0."""
    return target_f_alpha_derivative(alpha, 0, x)


def target_f_alpha_derivative(alpha: int, m: int, x):
    if alpha < 1 or int(alpha) != alpha:
        raise ValueError(f"alpha must be a positive integer, got {alpha}")
    if not 0 <= m <= alpha:
        raise ValueError(f"derivative order must lie in [0, {alpha}], got {m}")
    xa = np.asarray(x, dtype=np.float64)
    if np.any(xa < 0):
        raise ValueError("f_alpha is defined on x >= 0 only")
    if m == alpha and np.any(xa == 0):
        raise ValueError(f"the {m}-th derivative of f_{alpha} is unbounded at 0")
    a, c = _f_alpha_coeffs(alpha, m)
    pos = xa > 0
    safe = np.where(pos, xa, 1.0)
    val = (a * np.log(safe) + c) * safe ** (alpha - m) / math.factorial(alpha)
    out = np.where(pos, val, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Target:
    """A univariate regression target with analytic derivatives."""

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[int, np.ndarray], np.ndarray]
    domain: tuple[float, float]
    max_derivative: int

    def __call__(self, x):
        return self.value(x)


def f_alpha_target(alpha: int, domain: tuple[float, float] = (0.0, 1.0)) -> Target:
    return Target(
        f"f_alpha{alpha}",
        lambda x: target_f_alpha(alpha, x),
        lambda m, x: target_f_alpha_derivative(alpha, m, x),
        domain,
        alpha,
    )


def _sec_derivative(m: int, x):
    # sec^(m) via the polynomial recursion sec' = sec tan, tan' = 1 + tan^2
    x = np.asarray(x, dtype=np.float64)
    poly = np.polynomial.Polynomial  # in t = tan x, times sec x
    p = poly([1.0])
    for _ in range(m):
        p = p * poly([0.0, 1.0]) + p.deriv() * poly([1.0, 0.0, 1.0])
    return p(np.tan(x)) / np.cos(x)


def sec_target(domain: tuple[float, float] = (-1.5, 1.5)) -> Target:
    return Target("sec", lambda x: 1.0 / np.cos(np.asarray(x, dtype=np.float64)), _sec_derivative, domain, 8)


def _cusp_derivative(m: int, x):
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("x^(-1/10) needs x > 0")
    coef = math.prod(-0.1 - i for i in range(m))
    return coef * x ** (-0.1 - m)


def cusp_target(domain: tuple[float, float] = (0.01, 2.0)) -> Target:
    return Target("cusp", lambda x: _cusp_derivative(0, x), _cusp_derivative, domain, 8)


# data ------------------------------------------------------------------------


@dataclass(frozen=True)
class InputLaw:
    low: float = 0.0
    high: float = 1.0
    d: int = 1

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if not self.high > self.low:
            raise ValueError(f"empty input interval [{self.low}, {self.high}]")
        return rng.uniform(self.low, self.high, size=(n, self.d))


@dataclass(frozen=True)
class NoiseLaw:
    """Centred noise with standard deviation ``scale``."""

    kind: str = "gaussian"
    scale: float = 0.0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.scale < 0:
            raise ValueError("noise scale must be >= 0")
        if self.kind == "gaussian":
            return rng.normal(0.0, self.scale, size=n)
        if self.kind == "uniform":
            h = self.scale * math.sqrt(3.0)
            return rng.uniform(-h, h, size=n)
        raise ValueError(f"unknown noise law {self.kind!r}")


@dataclass
class Dataset:
    inputs: np.ndarray
    outputs: np.ndarray
    seed: int
    derivatives: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        if self.inputs.ndim == 1:
            self.inputs = self.inputs[:, None]
        self.outputs = np.asarray(self.outputs, dtype=np.float64).reshape(-1)
        if len(self.inputs) != len(self.outputs):
            raise ValueError(f"{len(self.inputs)} inputs but {len(self.outputs)} outputs")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.outputs))):
            raise ValueError("dataset contains non-finite values")
        for m, v in self.derivatives.items():
            if len(v) != len(self.outputs):
                raise ValueError(f"derivative targets of order {m} have the wrong length")

    def __len__(self) -> int:
        return len(self.outputs)


def _eval_target(target, x: np.ndarray) -> np.ndarray:
    x1 = x[:, 0] if x.shape[1] == 1 else x
    return np.asarray(target(x1), dtype=np.float64).reshape(-1)


def sample_dataset(
    target,
    N: int,
    input_law: InputLaw = InputLaw(),
    noise_law: NoiseLaw = NoiseLaw(),
    seed: int = 0,
    derivative_orders: Sequence[int] = (),
) -> Dataset:
    """I.i.d. pairs (X, f(X) + noise); noise is drawn after the inputs from the same generator."""
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    x = input_law.sample(rng, N)
    y = _eval_target(target, x) + noise_law.sample(rng, N)
    derivs = {}
    for m in derivative_orders:
        if not isinstance(target, Target):
            raise ValueError("derivative targets need a Target with an analytic derivative")
        derivs[m] = np.asarray(target.derivative(m, x[:, 0]), dtype=np.float64)
    return Dataset(x, y, seed, derivs)


# torch model -----------------------------------------------------------------


class TorchResKan(torch.nn.Module):
    """Trainable float64 copy of a ResKanNetwork; masks mark frozen entries."""

    def __init__(self, net: ResKanNetwork, residual: bool = True):
        super().__init__()
        self.order = net.order
        self.alpha = net.alpha
        self.meta = dict(net.meta)
        self.residual = residual
        t = lambda a: torch.nn.Parameter(torch.tensor(np.array(a), dtype=DTYPE))
        self.A = torch.nn.ParameterList([t(layer.A) for layer in net.layers])
        self.b = torch.nn.ParameterList([t(layer.b) for layer in net.layers])
        self.g = torch.nn.ParameterList([t(layer.g if residual else 0 * layer.g) for layer in net.layers])
        self.beta = torch.nn.ParameterList([t(layer.beta) for layer in net.layers])
        self.head_A = t(net.head_A)
        self.head_b = t(net.head_b)
        self.masks: dict[str, torch.Tensor] = {}
        for li, layer in enumerate(net.layers):
            self.masks[f"beta.{li}"] = torch.tensor(sparsity_mask(net.order, net.alpha, layer.d_out))
            if not residual:
                self.masks[f"g.{li}"] = torch.zeros(layer.g.shape, dtype=torch.bool)
        with torch.no_grad():
            self.apply_masks_()

    def trainable(self) -> list[tuple[str, torch.nn.Parameter, torch.Tensor | None]]:
        """(name, parameter, mask) in a fixed order; mask None means fully trainable."""
        out = []
        for li in range(len(self.A)):
            out.append((f"A.{li}", self.A[li], None))
            out.append((f"b.{li}", self.b[li], None))
            out.append((f"g.{li}", self.g[li], self.masks.get(f"g.{li}")))
            out.append((f"beta.{li}", self.beta[li], self.masks.get(f"beta.{li}")))
        out.append(("head_A", self.head_A, None))
        out.append(("head_b", self.head_b, None))
        return out

    def apply_masks_(self) -> None:
        for _, p, mask in self.trainable():
            if mask is not None:
                p.mul_(mask.to(DTYPE))

    def to_network(self) -> ResKanNetwork:
        det = lambda p: p.detach().cpu().numpy().copy()
        layers = tuple(
            ResKanLayer(det(A), det(b), det(g), det(beta))
            for A, b, g, beta in zip(self.A, self.b, self.g, self.beta)
        )
        return ResKanNetwork(layers, det(self.head_A), det(self.head_b), self.order, self.alpha, dict(self.meta))

    def forward(self, x: torch.Tensor, s: int = 0) -> torch.Tensor:
        """Jet of the output: shape (s+1, N, D), coefficient m is f^(m)/m!."""
        return jet_forward(self, x, s)


def _as_model(net, residual: bool = True) -> TorchResKan:
    return net if isinstance(net, TorchResKan) else TorchResKan(net, residual=residual)


@lru_cache(maxsize=None)
def _piece_table(order: int, s: int) -> torch.Tensor:
    """T[m, i, k, q]: on [k, k+1), N_i^(m)(t) = sum_q T[m, i, k, q] (t - k)^q.

    Built from exact rationals, so the pieces outside the support (and the
    extra slot k = I+1 used for every point outside [0, I+1)) are exactly 0.
    """
    T = np.zeros((s + 1, order + 1, order + 2, order + 1))
    for i in range(order + 1):
        c = [Fraction((-1) ** j * comb(i + 1, j), factorial(i)) for j in range(i + 2)]
        for k in range(order + 1):
            # sum_{j <= k} c_j (u + k - j)^i expanded in powers of u
            poly = [Fraction(0)] * (i + 1)
            for j in range(min(k, i + 1) + 1):
                for q in range(i + 1):
                    poly[q] += c[j] * comb(i, q) * Fraction(k - j) ** (i - q)
            for m in range(min(s, i) + 1):
                for q in range(i - m + 1):
                    T[m, i, k, q] = float(poly[q + m] * factorial(q + m) / factorial(q))
    return torch.tensor(T, dtype=DTYPE)


def _pieces(order: int, t: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Piece index in 0..I+1 (I+1 meaning outside [0, I+1)) and local powers (t - k)^q."""
    k = torch.floor(t.detach())
    inside = (k >= 0) & (k <= order)
    idx = torch.where(inside, k, torch.full_like(k, order + 1)).long()
    u = t - torch.where(inside, k, torch.zeros_like(k))
    powers = [torch.ones_like(u)]
    for _ in range(order):
        powers.append(powers[-1] * u)
    return idx, torch.stack(powers, dim=-1)


def _relu_derivatives(t: torch.Tensor, s: int) -> torch.Tensor:
    """ReLU and ReLU^2 derivatives of orders 0..s; shape (s+1, ..., 2)."""
    r = torch.relu(t)
    step = (t > 0).to(DTYPE)
    zero = torch.zeros_like(t)
    rows = [(r, r * r), (step, 2 * r), (zero, 2 * step)] + [(zero, zero)] * max(0, s - 2)
    return torch.stack([torch.stack(pair, dim=-1) for pair in rows[: s + 1]], dim=0)


def basis_derivatives(order: int, t: torch.Tensor, s: int) -> torch.Tensor:
    """Dictionary derivatives of orders 0..s at ``t``; shape (s+1, *t.shape, I+3).

    Splines are evaluated piece by piece, so the order-m derivative of N_m is
    the right-continuous step function; ReLU and ReLU^2 derivatives at 0 use
    the value 0 (ReLU'(0) = 0).
    """
    idx, U = _pieces(order, t)
    T = _piece_table(order, s)  # (s+1, I+1, I+2, I+1)
    coeffs = T.permute(2, 0, 1, 3)[idx]  # (..., s+1, I+1, I+1)
    splines = torch.movedim(torch.einsum("...miq,...q->...mi", coeffs, U), -2, 0)
    return torch.cat([splines, _relu_derivatives(t, s)], dim=-1)


def _series_mul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    n = a.shape[0]
    out = [sum(a[i] * b[k - i] for i in range(k + 1)) for k in range(n)]
    return torch.stack(out, dim=0)


def _activate(u: torch.Tensor, beta: torch.Tensor, order: int) -> torch.Tensor:
    """Compose each channel's activation with the jet ``u`` of shape (s+1, P, N, C).

    ``beta`` has shape (P, I+3, C); P indexes independent parameter sets.
    """
    s = u.shape[0] - 1
    idx, U = _pieces(order, u[0])  # (P, N, C), (P, N, C, I+1)
    P, N, C = idx.shape
    W = torch.einsum("pic,mikq->pckmq", beta[:, : order + 1], _piece_table(order, s))
    # each point picks the polynomial of its own piece
    sel = W[torch.arange(P)[:, None, None], torch.arange(C)[None, None, :], idx]  # (P, N, C, s+1, I+1)
    phi = torch.movedim((sel * U[..., None, :]).sum(-1), -1, 0)
    phi = phi + torch.einsum("mpncr,prc->mpnc", _relu_derivatives(u[0], s), beta[:, order + 1 :])
    out = torch.zeros_like(u)
    out[0] = phi[0]
    if s == 0:
        return out
    delta = u.clone()
    delta[0] = 0.0
    power = delta
    for m in range(1, s + 1):
        out = out + phi[m] / math.factorial(m) * power
        if m < s:
            power = _series_mul(power, delta)
    return out


def _stacked(model: TorchResKan) -> list[torch.Tensor]:
    """Parameters flattened to the ``trainable`` order, each with a leading axis of length 1."""
    return [p.unsqueeze(0) for _, p, _ in model.trainable()]


def _jet(params: Sequence[torch.Tensor], order: int, x: torch.Tensor, s: int) -> torch.Tensor:
    """Output jet of shape (s+1, P, N, D) for P stacked parameter sets."""
    if x.dim() == 1:
        x = x[:, None]
    if s > 0 and x.shape[1] != 1:
        raise ValueError("input derivatives are only supported for one-dimensional inputs")
    P = params[0].shape[0]
    h = torch.zeros((s + 1, P, *x.shape), dtype=DTYPE)
    h[0] = x
    if s > 0:
        h[1] = 1.0
    *layer_params, head_A, head_b = params
    for li in range(0, len(layer_params), 4):
        A, b, g, beta = layer_params[li : li + 4]
        u = h @ A.transpose(-1, -2)
        u = torch.cat([(u[0] + b[:, None, :])[None], u[1:]], dim=0)
        out = _activate(u, beta, order)
        n = g.shape[-1]
        res = torch.zeros_like(out)
        res[..., :n] = h[..., :n] * g[:, None, :]
        h = out + res
    y = h @ head_A.transpose(-1, -2)
    return torch.cat([(y[0] + head_b[:, None, :])[None], y[1:]], dim=0)


def jet_forward(model: TorchResKan, x: torch.Tensor, s: int = 0) -> torch.Tensor:
    """Output jet of shape (s+1, N, D)."""
    return _jet(_stacked(model), model.order, x, s)[:, 0]


def knot_hits(model: TorchResKan, x: torch.Tensor, s: int) -> int:
    """Pre-activations sitting exactly on a break point of an active basis function."""
    if s == 0:
        return 0
    if x.dim() == 1:
        x = x[:, None]
    hits = 0
    params = _stacked(model)
    with torch.no_grad():
        h = x[None]
        *layer_params, _, _ = params
        for li in range(0, len(layer_params), 4):
            A, b, g, beta = layer_params[li : li + 4]
            u = h @ A.transpose(-1, -2) + b[:, None, :]
            active = beta[0] != 0
            for i in range(model.order + 1):
                if s >= i:
                    on_knot = (u == torch.round(u)) & (u >= 0) & (u <= i + 1)
                    hits += int((on_knot & active[i]).sum())
            at0 = u == 0
            hits += int((at0 & active[model.order + 1]).sum())
            if s >= 2:
                hits += int((at0 & active[model.order + 2]).sum())
            out = _activate(u[None], beta, model.order)[0]
            n = g.shape[-1]
            res = torch.zeros_like(out)
            res[..., :n] = h[..., :n] * g[:, None, :]
            h = out + res
    return hits


def input_derivative(net, s: int, x) -> np.ndarray | float:
    """s-th derivative of the scalar network output in its one-dimensional input."""
    if s < 0:
        raise ValueError("derivative order must be >= 0")
    model = _as_model(net)
    xa = np.asarray(x, dtype=np.float64)
    xt = torch.tensor(xa.reshape(-1, 1), dtype=DTYPE)
    hits = knot_hits(model, xt, s)
    if hits:
        warnings.warn(f"{hits} pre-activations lie on knots of insufficiently smooth basis functions", KnotWarning)
    with torch.no_grad():
        jet = jet_forward(model, xt, s)
    out = (jet[s] * math.factorial(s)).numpy()
    if out.shape[1] == 1:
        out = out[:, 0]
    return float(out[0]) if xa.ndim == 0 else out.reshape(xa.shape + out.shape[1:])


# loss and gradients ----------------------------------------------------------


@dataclass
class Batch:
    x: np.ndarray
    y: np.ndarray
    dy: np.ndarray | None = None

    @classmethod
    def from_dataset(cls, data: Dataset, s: int = 0, idx=None) -> "Batch":
        sel = slice(None) if idx is None else idx
        dy = data.derivatives.get(s) if s > 0 else data.outputs
        return cls(data.inputs[sel], data.outputs[sel], None if dy is None else dy[sel])


def _loss_terms_stacked(
    params: Sequence[torch.Tensor], order: int, batch: Batch, s: int
) -> tuple[torch.Tensor, torch.Tensor]:
    """Value and derivative MSE for each of P stacked parameter sets; shapes (P,)."""
    x = torch.as_tensor(np.asarray(batch.x, dtype=np.float64), dtype=DTYPE)
    y = torch.as_tensor(np.asarray(batch.y, dtype=np.float64), dtype=DTYPE)
    jet = _jet(params, order, x, s)
    value_mse = torch.mean((y - jet[0, :, :, 0]) ** 2, dim=-1)
    if s == 0:
        return value_mse, value_mse
    if batch.dy is None:
        raise ValueError(f"batch has no derivative targets of order {s}")
    dy = torch.as_tensor(np.asarray(batch.dy, dtype=np.float64), dtype=DTYPE)
    deriv_mse = torch.mean((dy - jet[s, :, :, 0] * math.factorial(s)) ** 2, dim=-1)
    return value_mse, deriv_mse


def _combine(value_mse, deriv_mse, lam: float):
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return value_mse if lam == 0.0 else (1.0 - lam) * value_mse + lam * deriv_mse


def _loss_terms(model: TorchResKan, batch: Batch, s: int) -> tuple[torch.Tensor, torch.Tensor]:
    value_mse, deriv_mse = _loss_terms_stacked(_stacked(model), model.order, batch, s)
    return value_mse[0], deriv_mse[0]


def sobolev_loss_tensor(model: TorchResKan, batch: Batch, lam: float, s: int) -> torch.Tensor:
    if len(batch.y) == 0:
        raise ValueError("empty batch")
    return _combine(*_loss_terms(model, batch, s), lam)


def sobolev_loss(net, batch: Batch, lam: float, s: int) -> float:
    """(1 - lam) * MSE(values) + lam * MSE(s-th input derivatives)."""
    with torch.no_grad():
        return float(sobolev_loss_tensor(_as_model(net), batch, lam, s))


def param_names(net) -> list[str]:
    model = _as_model(net)
    names = []
    for name, p, mask in model.trainable():
        for pos in np.ndindex(*p.shape):
            if mask is None or bool(mask[pos]):
                names.append(f"{name}{list(pos)}")
    return names


def param_gradient(net, batch: Batch, lam: float, s: int) -> np.ndarray:
    """Gradient of the Sobolev loss over all trainable entries, in ``param_names`` order."""
    model = _as_model(net)
    model.zero_grad()
    sobolev_loss_tensor(model, batch, lam, s).backward()
    flat = []
    for name, p, mask in model.trainable():
        grad = p.grad if p.grad is not None else torch.zeros_like(p)
        bad = ~torch.isfinite(grad)
        if bad.any():
            pos = [int(i) for i in torch.nonzero(bad)[0]]
            raise FloatingPointError(f"non-finite gradient at {name}{pos}")
        keep = torch.ones_like(grad, dtype=torch.bool) if mask is None else mask
        flat.append(grad[keep].reshape(-1))
    return torch.cat(flat).numpy()


def param_gradient_check(net, batch: Batch, lam: float = 0.0, s: int = 0, step: float = 1e-6) -> float:
    """Largest relative discrepancy between reverse-mode and central-difference gradients.

    Entry-wise error is |g - fd| / max(|g|, |fd|, floor). The floor is the
    larger of 1e-4 * max|g| and the round-off resolution of a central
    difference, 1e4 * eps * |loss| / step: below it a difference quotient
    carries no significant digits and the entry is judged on an absolute basis.
    All perturbed losses are evaluated in one stacked forward pass.
    """
    model = _as_model(net)
    grad = param_gradient(model, batch, lam, s)
    base = [p.detach() for _, p, _ in model.trainable()]
    coords = []
    for k, (_, p, mask) in enumerate(model.trainable()):
        for pos in np.ndindex(*p.shape):
            if mask is None or bool(mask[pos]):
                coords.append((k, pos))
    P = 2 * len(coords)
    stacked = [b.unsqueeze(0).repeat(P, *([1] * b.dim())) for b in base]
    for c, (k, pos) in enumerate(coords):
        stacked[k][(2 * c, *pos)] += step
        stacked[k][(2 * c + 1, *pos)] -= step
    with torch.no_grad():
        losses = _combine(*_loss_terms_stacked(stacked, model.order, batch, s), lam).numpy()
        loss = float(sobolev_loss_tensor(model, batch, lam, s))
    fd = (losses[0::2] - losses[1::2]) / (2 * step)
    eps = np.finfo(np.float64).eps
    floor = max(1e-4 * float(np.max(np.abs(grad), initial=0.0)), 1e4 * eps * abs(loss) / step, 1e-300)
    denom = np.maximum(np.maximum(np.abs(grad), np.abs(fd)), floor)
    return float(np.max(np.abs(grad - fd) / denom, initial=0.0))


# training --------------------------------------------------------------------


def lambda_schedule(epochs: int) -> list[Fraction]:
    """Linear from 1 at the first epoch to 0 at the last (a single epoch gets 0)."""
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if epochs == 1:
        return [Fraction(0)]
    return [Fraction(epochs - 1 - e, epochs - 1) for e in range(epochs)]


LR_SCHEDULES = ("constant", "cosine")


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 2000
    learning_rate: float = 1e-2
    batch_size: int | None = None
    s: int = 0
    momentum: float = 0.9
    seed: int = 0
    residual: bool = True
    grad_clip: float | None = None
    lr_schedule: str = "constant"

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.s < 0:
            raise ValueError("s must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ValueError("grad_clip must be > 0")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ValueError(f"lr_schedule must be one of {LR_SCHEDULES}, got {self.lr_schedule!r}")


HISTORY_COLUMNS = ("epoch", "lambda", "train_loss", "deriv_loss", "test_mse")


@dataclass
class TrainResult:
    net: ResKanNetwork
    history: list[dict]
    initial_mse: float
    final_mse: float
    final_test_mse: float | None


def _value_mse(model: TorchResKan, data: Dataset) -> float:
    with torch.no_grad():
        x = torch.as_tensor(data.inputs, dtype=DTYPE)
        pred = jet_forward(model, x, 0)[0, :, 0]
        return float(torch.mean((torch.as_tensor(data.outputs, dtype=DTYPE) - pred) ** 2))


def train(net: ResKanNetwork, data: Dataset, config: TrainingConfig, test: Dataset | None = None) -> TrainResult:
    """SGD with momentum on the Sobolev loss with a linearly decaying lambda.

    With ``lr_schedule="cosine"`` the step size anneals to zero over the run,
    which damps the late loss spikes momentum SGD is prone to.

    Gradients of entries frozen by the smoothness pattern (and of the gates
    when ``residual`` is off) are zeroed before every step. Minibatch order is
    drawn from a generator seeded by ``config.seed``.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    s = config.s
    if s > 0 and s not in data.derivatives:
        raise ValueError(f"dataset carries no derivative targets of order {s}")
    torch.manual_seed(config.seed)
    model = TorchResKan(net, residual=config.residual)
    params = [p for _, p, _ in model.trainable()]
    opt = torch.optim.SGD(params, lr=config.learning_rate, momentum=config.momentum)
    sched = (
        torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=max(config.epochs, 1))
        if config.lr_schedule == "cosine"
        else None
    )
    rng = np.random.default_rng(config.seed)
    n = len(data)
    bs = n if config.batch_size is None else min(config.batch_size, n)
    initial = _value_mse(model, data)
    history: list[dict] = []
    lams = lambda_schedule(config.epochs) if config.epochs else []
    for epoch, lam in enumerate(lams, start=1):
        order = rng.permutation(n) if bs < n else np.arange(n)
        lam_f = float(lam)
        tot = dtot = 0.0
        for start in range(0, n, bs):
            batch = Batch.from_dataset(data, s, order[start : start + bs])
            opt.zero_grad()
            value_mse, deriv_mse = _loss_terms(model, batch, s)
            loss = (1.0 - lam_f) * value_mse + lam_f * deriv_mse if lam_f else value_mse
            lv = float(loss.detach())
            if not math.isfinite(lv) or lv > DIVERGENCE_LIMIT:
                raise TrainingDiverged(epoch, lv, history)
            loss.backward()
            for _, p, mask in model.trainable():
                if mask is not None and p.grad is not None:
                    p.grad.mul_(mask.to(DTYPE))
            if config.grad_clip is not None:
                torch.nn.utils.clip_grad_norm_(params, config.grad_clip)
            opt.step()
            w = len(batch.y) / n
            tot += w * lv
            dtot += w * float(deriv_mse.detach())
        if sched is not None:
            sched.step()
        history.append(
            {
                "epoch": epoch,
                "lambda": lam_f,
                "train_loss": tot,
                "deriv_loss": dtot,
                "test_mse": _value_mse(model, test) if test is not None else float("nan"),
            }
        )
    trained = model.to_network()
    return TrainResult(
        trained,
        history,
        initial,
        _value_mse(model, data),
        _value_mse(model, test) if test is not None else None,
    )


# risks -----------------------------------------------------------------------


@dataclass(frozen=True)
class RiskReport:
    empirical_risk: float
    true_risk_estimate: float
    mc_samples: int

    @property
    def gap(self) -> float:
        return abs(self.true_risk_estimate - self.empirical_risk)


def _predict(net, x: np.ndarray) -> np.ndarray:
    if isinstance(net, ResKanNetwork):
        return np.asarray(net(x))[:, 0]
    return np.asarray(net(x[:, 0] if x.shape[1] == 1 else x)).reshape(-1)


def empirical_risk(net, data: Dataset) -> float:
    """Mean absolute residual (1/N) sum |f_hat(X_n) - Y_n|."""
    return float(np.mean(np.abs(_predict(net, data.inputs) - data.outputs)))


def true_risk_mc(
    net,
    target,
    input_law: InputLaw,
    noise_law: NoiseLaw,
    M: int,
    seed: int,
    chunk: int = 200_000,
) -> float:
    """Monte-Carlo estimate of E|f_hat(X) - (f(X) + noise)| from M fresh draws."""
    if M < 1:
        raise ValueError("M must be >= 1")
    rng = np.random.default_rng(seed)
    total = 0.0
    done = 0
    while done < M:
        m = min(chunk, M - done)
        x = input_law.sample(rng, m)
        y = _eval_target(target, x) + noise_law.sample(rng, m)
        total += float(np.sum(np.abs(_predict(net, x) - y)))
        done += m
    return total / M


def risk_report(net, data: Dataset, target, input_law: InputLaw, noise_law: NoiseLaw, M: int, seed: int) -> RiskReport:
    return RiskReport(empirical_risk(net, data), true_risk_mc(net, target, input_law, noise_law, M, seed), M)
