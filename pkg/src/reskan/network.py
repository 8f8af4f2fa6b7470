"""Residual KAN layers and networks.

Each neuron's activation mixes the dictionary
``[N_0, ..., N_I, ReLU, ReLU^2]`` (rows of ``beta`` in that order). A layer
computes ``sigma_beta(A x + b) + G x`` where ``G`` is rectangular-diagonal and
stored as its ``min(d_in, d_out)`` diagonal values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .splines import MAX_ORDER, eval_cardinal


def relu(t: np.ndarray) -> np.ndarray:
    return np.maximum(t, 0.0)


def dictionary_size(order: int) -> int:
    return order + 3


def basis_values(order: int, t: np.ndarray) -> np.ndarray:
    """Dictionary evaluated at ``t``; a trailing axis of length I+3 is appended."""
    t = np.asarray(t, dtype=np.float64)
    cols = [np.asarray(eval_cardinal(i, t)) for i in range(order + 1)]
    r = relu(t)
    cols.append(r)
    cols.append(r * r)
    return np.stack(cols, axis=-1)


@dataclass(frozen=True, eq=False)
class ActivationMix:
    """Coefficients of one neuron's trainable activation."""

    beta: np.ndarray

    @property
    def order(self) -> int:
        return len(self.beta) - 3

    def __call__(self, t):
        return activation_apply(self, t)


def activation_apply(mix: ActivationMix, t):
    """sum_i beta_i N_i(t) + beta_{I+1} ReLU(t) + beta_{I+2} ReLU(t)^2."""
    beta = np.asarray(mix.beta, dtype=np.float64)
    out = basis_values(len(beta) - 3, np.asarray(t, dtype=np.float64)) @ beta
    return float(out) if np.ndim(out) == 0 else out


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {arr.shape}")
    return arr


def _as_vector(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class ResKanLayer:
    A: np.ndarray
    b: np.ndarray
    g: np.ndarray
    beta: np.ndarray

    def __post_init__(self) -> None:
        A = _as_matrix(self.A, "A")
        b = _as_vector(self.b, "b")
        g = _as_vector(self.g, "g")
        beta = _as_matrix(self.beta, "beta")
        d_out, d_in = A.shape
        if b.shape != (d_out,):
            raise ValueError(f"b has shape {b.shape}, expected ({d_out},)")
        if g.shape != (min(d_in, d_out),):
            raise ValueError(f"diagonal gate has length {g.shape[0]}, expected {min(d_in, d_out)}")
        if beta.shape[1] != d_out or beta.shape[0] < 3:
            raise ValueError(f"beta has shape {beta.shape}, expected (I+3, {d_out})")
        for name, arr in (("A", A), ("b", b), ("g", g), ("beta", beta)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def d_in(self) -> int:
        return self.A.shape[1]

    @property
    def d_out(self) -> int:
        return self.A.shape[0]

    @property
    def order(self) -> int:
        return self.beta.shape[0] - 3

    @property
    def G(self) -> np.ndarray:
        """Dense rectangular-diagonal gate matrix."""
        G = np.zeros((self.d_out, self.d_in))
        n = self.g.shape[0]
        G[np.arange(n), np.arange(n)] = self.g
        return G

    def mixes(self) -> list[ActivationMix]:
        return [ActivationMix(self.beta[:, c].copy()) for c in range(self.d_out)]

    @classmethod
    def from_dense_gate(cls, A, b, G, beta) -> "ResKanLayer":
        G = _as_matrix(G, "G")
        n = min(G.shape)
        off = G.copy()
        off[np.arange(n), np.arange(n)] = 0.0
        if np.any(off != 0.0):
            rows, cols = np.nonzero(off)
            raise ValueError(f"gate is not diagonal: nonzero entry at ({rows[0]}, {cols[0]})")
        return cls(A, b, np.diagonal(G).copy(), beta)


def layer_forward(layer: ResKanLayer, x) -> np.ndarray:
    """Apply one layer to a vector or to a batch of row vectors."""
    xa = np.asarray(x, dtype=np.float64)
    if xa.shape[-1] != layer.d_in:
        raise ValueError(f"input has dimension {xa.shape[-1]}, layer expects {layer.d_in}")
    pre = xa @ layer.A.T + layer.b
    # per-channel contraction of the dictionary with that channel's beta column
    act = np.einsum("...cr,rc->...c", basis_values(layer.order, pre), layer.beta)
    n = layer.g.shape[0]
    res = np.zeros_like(pre)
    res[..., :n] = xa[..., :n] * layer.g
    return act + res


@dataclass(frozen=True)
class NetworkStats:
    depth: int
    width: int
    nonzero_params: int


@dataclass(frozen=True, eq=False)
class ResKanNetwork:
    """Layer stack followed by an affine head."""

    layers: tuple[ResKanLayer, ...]
    head_A: np.ndarray
    head_b: np.ndarray
    order: int
    alpha: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        layers = tuple(self.layers)
        head_A = _as_matrix(self.head_A, "head_A")
        head_b = _as_vector(self.head_b, "head_b")
        if not 0 <= self.order <= MAX_ORDER:
            raise ValueError(f"order must lie in [0, {MAX_ORDER}], got {self.order}")
        if self.alpha < 0 or not math.isfinite(self.alpha):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        for i, layer in enumerate(layers):
            if layer.order != self.order:
                raise ValueError(f"layer {i} has order {layer.order}, network has {self.order}")
            if i > 0 and layer.d_in != layers[i - 1].d_out:
                raise ValueError(
                    f"layer {i} expects input {layer.d_in}, previous layer emits {layers[i - 1].d_out}"
                )
        if layers and head_A.shape[1] != layers[-1].d_out:
            raise ValueError(f"head expects {head_A.shape[1]} inputs, last layer emits {layers[-1].d_out}")
        if head_b.shape != (head_A.shape[0],):
            raise ValueError(f"head_b has shape {head_b.shape}, expected ({head_A.shape[0]},)")
        head_A.setflags(write=False)
        head_b.setflags(write=False)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "head_A", head_A)
        object.__setattr__(self, "head_b", head_b)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def d_in(self) -> int:
        return self.layers[0].d_in if self.layers else self.head_A.shape[1]

    @property
    def d_out(self) -> int:
        return self.head_A.shape[0]

    @property
    def depth(self) -> int:
        return len(self.layers)

    def __call__(self, x) -> np.ndarray:
        return network_forward(self, x)

    def replace(self, **changes) -> "ResKanNetwork":
        kw = dict(
            layers=self.layers,
            head_A=self.head_A,
            head_b=self.head_b,
            order=self.order,
            alpha=self.alpha,
            meta=dict(self.meta),
        )
        kw.update(changes)
        return ResKanNetwork(**kw)


def network_forward(net: ResKanNetwork, x) -> np.ndarray:
    xa = np.asarray(x, dtype=np.float64)
    if xa.ndim == 0 or xa.shape[-1] != net.d_in:
        raise ValueError(f"input has shape {xa.shape}, network expects dimension {net.d_in}")
    h = xa
    for layer in net.layers:
        h = layer_forward(layer, h)
    return h @ net.head_A.T + net.head_b


def sparsity_mask(order: int, alpha: float, d_out: int) -> np.ndarray:
    """Boolean mask of beta entries allowed to be nonzero."""
    mask = np.ones((order + 3, d_out), dtype=bool)
    mask[: min(math.ceil(alpha), order + 1), :] = False
    return mask


def validate_sparsity(net: ResKanNetwork, alpha: float | None = None) -> list[tuple[int, int, int]]:
    """(layer, row, column) of every spline coefficient breaking the smoothness pattern.

    Rows ``i < ceil(alpha)`` among the first I+1 (spline) rows must vanish; the
    ReLU and ReLU^2 rows are exempt. ``alpha`` defaults to the network's tag.
    """
    a = net.alpha if alpha is None else alpha
    cut = min(math.ceil(a), net.order + 1)
    violations = []
    for li, layer in enumerate(net.layers):
        rows, cols = np.nonzero(layer.beta[:cut, :])
        violations.extend((li, int(r), int(c)) for r, c in zip(rows, cols))
    return violations


def count_stats(net: ResKanNetwork) -> NetworkStats:
    widths = [layer.d_out for layer in net.layers] + [net.d_out]
    nz = int(np.count_nonzero(net.head_A) + np.count_nonzero(net.head_b))
    for layer in net.layers:
        nz += int(
            np.count_nonzero(layer.A)
            + np.count_nonzero(layer.b)
            + np.count_nonzero(layer.g)
            + np.count_nonzero(layer.beta)
        )
    return NetworkStats(depth=net.depth, width=max(widths), nonzero_params=nz)


def identity_gate(d_in: int, d_out: int) -> np.ndarray:
    return np.ones(min(d_in, d_out))


def zero_layer(d_in: int, d_out: int, order: int) -> ResKanLayer:
    return ResKanLayer(
        np.zeros((d_out, d_in)), np.zeros(d_out), np.zeros(min(d_in, d_out)), np.zeros((order + 3, d_out))
    )


def random_network(
    rng: np.random.Generator,
    widths: Sequence[int],
    d_out: int,
    order: int,
    alpha: float = 0.0,
    residual: bool = True,
    beta_scale: float = 0.1,
    bias: str = "fan_in",
) -> ResKanNetwork:
    """Network initialised with uniform fan-in scaled affine maps.

    ``widths`` starts with the input dimension. Gates start at the rectangular
    identity (or zero with ``residual=False``); beta entries forbidden by the
    smoothness pattern start at zero. ``bias="support"`` draws hidden biases
    from U(0, order+1) so pre-activations start inside the spline support
    instead of half of them in the dead region u < 0.
    """
    if bias not in ("fan_in", "support"):
        raise ValueError(f"bias must be 'fan_in' or 'support', got {bias!r}")
    layers = []
    for d_in, d_o in zip(widths[:-1], widths[1:]):
        bound = 1.0 / math.sqrt(d_in)
        beta = rng.uniform(-beta_scale, beta_scale, size=(order + 3, d_o))
        beta[~sparsity_mask(order, alpha, d_o)] = 0.0
        A = rng.uniform(-bound, bound, size=(d_o, d_in))
        b = rng.uniform(0.0, order + 1.0, size=d_o) if bias == "support" else rng.uniform(-bound, bound, size=d_o)
        layers.append(
            ResKanLayer(
                A,
                b,
                identity_gate(d_in, d_o) if residual else np.zeros(min(d_in, d_o)),
                beta,
            )
        )
    bound = 1.0 / math.sqrt(widths[-1])
    return ResKanNetwork(
        tuple(layers),
        rng.uniform(-bound, bound, size=(d_out, widths[-1])),
        rng.uniform(-bound, bound, size=d_out),
        order=order,
        alpha=alpha,
    )
