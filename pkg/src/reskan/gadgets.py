"""Exact Res-KAN constructions: squaring, products, and (dyadic) tensor splines.

Blocks are first written in the textbook channel order (multiplier channels
first, pass-through coordinates after). In that order the pass-through
identity blocks of the residual gates sit off the main diagonal, which a
rectangular-diagonal gate cannot hold, so :func:`realize` relabels the hidden
channels until every gate is diagonal. The relabelling is recorded in
``net.meta["channel_perms"]``: entry ``l`` maps block-order channel ``c`` of
boundary ``l`` (0 = input) to its stored index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .network import ResKanLayer, ResKanNetwork
from .splines import DyadicIndex

A_SQUARE = np.array([[1.0], [-1.0]])
A_MULT = np.array([[1, 1], [-1, -1], [1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
A_HEAD = 0.5 * np.array([[1, 1, -1, -1, -1, -1]], dtype=float)
A_MERGE = np.array(
    [[1, -1, 1], [-1, 1, -1], [1, -1, 0], [-1, 1, 0], [0, 0, 1], [0, 0, -1]], dtype=float
)

GADGET_KINDS = ("square", "pair_mult", "mult_d", "tensor_spline", "mra_spline")


@dataclass
class BlockLayer:
    """A layer in block (unpermuted) channel order with a dense gate."""

    A: np.ndarray
    b: np.ndarray
    G: np.ndarray
    beta: np.ndarray


def relu_row(order: int) -> int:
    return order + 1


def relu2_row(order: int) -> int:
    return order + 2


def _beta(order: int, d_out: int, row: int, channels: Sequence[int]) -> np.ndarray:
    beta = np.zeros((order + 3, d_out))
    beta[row, list(channels)] = 1.0
    return beta


def _block(top_left: np.ndarray, rows: int, cols: int, eye_size: int = 0) -> np.ndarray:
    """``[[top_left, 0], [0, I]]`` padded to ``rows x cols``; the identity fills the lower-right corner."""
    out = np.zeros((rows, cols))
    r, c = top_left.shape
    out[:r, :c] = top_left
    if eye_size:
        out[rows - eye_size :, cols - eye_size :] = np.eye(eye_size)
    return out


def multiplier_blocks(d: int, order: int) -> list[BlockLayer]:
    """The 2(d-1) layers of the d-fold product network in textbook order.

    Unit 1 squares (x1+x2, x1, x2) and emits (ReLU(p2), ReLU(-p2), x3, ..., xd);
    unit l >= 2 merges ReLU(p) - ReLU(-p) = p with x_{l+1} the same way.
    """
    if d < 2:
        raise ValueError(f"the product network needs d >= 2 factors, got {d}")
    r2, r1 = relu2_row(order), relu_row(order)
    blocks = []
    for unit in range(1, d):
        if unit == 1:
            n_in, first, gadget_in = d, A_MULT, 2
        else:
            n_in, first, gadget_in = d - unit + 2, A_MERGE, 3
        rest = n_in - gadget_in
        n_mid = 6 + rest
        n_out = 2 + rest
        blocks.append(
            BlockLayer(
                _block(first, n_mid, n_in),
                np.zeros(n_mid),
                _block(np.zeros((6, gadget_in)), n_mid, n_in, rest),
                _beta(order, n_mid, r2, range(6)),
            )
        )
        second = np.vstack([A_HEAD, -A_HEAD])
        blocks.append(
            BlockLayer(
                _block(second, n_out, n_mid),
                np.zeros(n_out),
                _block(np.zeros((2, 6)), n_out, n_mid, rest),
                _beta(order, n_out, r1, range(2)),
            )
        )
    return blocks


def _lane_length(blocks: Sequence[BlockLayer], li: int, channel: int) -> int:
    """Number of later layers whose gates forward output ``channel`` of layer ``li``."""
    n = 0
    for blk in blocks[li + 1 :]:
        rows = np.nonzero(blk.G[:, channel])[0]
        if rows.size == 0:
            break
        channel = int(rows[0])
        n += 1
    return n


def realize(
    blocks: Sequence[BlockLayer],
    head_A: np.ndarray,
    head_b: np.ndarray,
    order: int,
    alpha: float = 0.0,
    meta: dict | None = None,
    input_perm: Sequence[int] | None = None,
) -> ResKanNetwork:
    """Relabel hidden channels so each dense gate becomes rectangular-diagonal.

    ``input_perm[c]`` is the network input coordinate feeding block input
    ``c`` (identity by default). A gate entry (r, c) pins output channel r to
    the index of input channel c; the other channels take the free indices,
    longest-forwarded first, so channels that travel furthest sit where the
    narrowing later layers still have room. Raises ``ValueError`` when this
    greedy labelling does not fit.
    """
    d_in = blocks[0].A.shape[1] if blocks else head_A.shape[1]
    perm_in = np.arange(d_in) if input_perm is None else np.asarray(input_perm, dtype=int)
    if sorted(perm_in.tolist()) != list(range(d_in)):
        raise ValueError(f"input_perm must be a permutation of range({d_in})")
    perms = [perm_in.tolist()]
    layers = []
    for li, blk in enumerate(blocks):
        n_out, n_in = blk.A.shape
        perm_out = np.full(n_out, -1)
        rows, cols = np.nonzero(blk.G)
        if len(set(rows.tolist())) != len(rows) or len(set(cols.tolist())) != len(cols):
            raise ValueError(f"layer {li}: gate is not a partial matching of channels")
        for r, c in zip(rows, cols):
            target = perm_in[c]
            if target >= n_out:
                raise ValueError(f"layer {li}: forwarded channel {c} has index {target} >= width {n_out}")
            perm_out[r] = target
        free = iter(sorted(set(range(n_out)) - set(perm_out[perm_out >= 0].tolist())))
        unassigned = [r for r in range(n_out) if perm_out[r] < 0]
        unassigned.sort(key=lambda r: (-_lane_length(blocks, li, r), r))
        for r in unassigned:
            perm_out[r] = next(free)
        A = np.zeros((n_out, n_in))
        G = np.zeros((n_out, n_in))
        A[np.ix_(perm_out, perm_in)] = blk.A
        G[np.ix_(perm_out, perm_in)] = blk.G
        b = np.zeros(n_out)
        b[perm_out] = blk.b
        beta = np.zeros_like(blk.beta)
        beta[:, perm_out] = blk.beta
        layers.append(ResKanLayer.from_dense_gate(A, b, G, beta))
        perms.append(perm_out.tolist())
        perm_in = perm_out
    hA = np.zeros((head_A.shape[0], len(perm_in)))
    hA[:, perm_in] = head_A
    m = dict(meta or {})
    m["channel_perms"] = perms
    return ResKanNetwork(tuple(layers), hA, np.asarray(head_b, dtype=float), order=order, alpha=alpha, meta=m)


def blocks_of(net: ResKanNetwork) -> list[BlockLayer]:
    """Undo the relabelling of a compiled network (inverse of :func:`realize`)."""
    perms = net.meta.get("channel_perms")
    if perms is None:
        perms = [list(range(net.d_in))] + [list(range(layer.d_out)) for layer in net.layers]
    out = []
    for li, layer in enumerate(net.layers):
        p_in, p_out = np.asarray(perms[li]), np.asarray(perms[li + 1])
        out.append(
            BlockLayer(
                layer.A[np.ix_(p_out, p_in)],
                layer.b[p_out],
                layer.G[np.ix_(p_out, p_in)],
                layer.beta[:, p_out],
            )
        )
    return out


def compile_square(order: int = 1) -> ResKanNetwork:
    """t -> ReLU(t)^2 + ReLU(-t)^2 = t^2."""
    layer = ResKanLayer(A_SQUARE, np.zeros(2), np.zeros(1), _beta(order, 2, relu2_row(order), (0, 1)))
    return ResKanNetwork((layer,), np.array([[1.0, 1.0]]), np.zeros(1), order=order, meta={"kind": "square"})


def compile_pair_multiplier(order: int = 1) -> ResKanNetwork:
    """(u, v) -> uv through the polarisation identity uv = [q(u+v) - q(u) - q(v)] / 2."""
    layer = ResKanLayer(A_MULT, np.zeros(6), np.zeros(2), _beta(order, 6, relu2_row(order), range(6)))
    return ResKanNetwork((layer,), A_HEAD.copy(), np.zeros(1), order=order, meta={"kind": "pair_mult"})


def compile_multiplier(d: int, order: int = 1) -> ResKanNetwork:
    """Exact d-fold product network of depth 2(d-1) and width d+4.

    Block input ``c`` is coordinate ``d-1-c``; the product is symmetric so the
    function is unchanged.
    """
    if d < 2:
        raise ValueError(f"compile_multiplier requires d >= 2, got {d}")
    # coordinates enter the product in reverse so the pass-through lanes
    # (pinned to their input index) fit inside the narrowing later units
    return realize(
        multiplier_blocks(d, order),
        np.array([[1.0, -1.0]]),
        np.zeros(1),
        order=order,
        meta={"kind": "mult_d", "d": d},
        input_perm=list(range(d - 1, -1, -1)),
    )


def _spline_blocks(d: int, order: int, scale: float, shift: np.ndarray) -> list[BlockLayer]:
    first = BlockLayer(
        scale * np.eye(d),
        -np.asarray(shift, dtype=float),
        np.zeros((d, d)),
        _beta(order, d, order, range(d)),
    )
    if d == 1:
        return [first]
    return [first] + multiplier_blocks(d, order)


def _spline_net(d: int, order: int, idx: DyadicIndex | None, kind: str) -> ResKanNetwork:
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if order < 1:
        raise ValueError(f"spline networks need order >= 1, got {order}")
    k = 0 if idx is None else idx.k
    shift = np.zeros(d) if idx is None else np.asarray(idx.j, dtype=float)
    if idx is not None and idx.d != d:
        raise ValueError(f"shift has length {idx.d}, expected {d}")
    head = np.array([[1.0]]) if d == 1 else np.array([[1.0, -1.0]])
    meta = {"kind": kind, "d": d}
    if idx is not None:
        meta.update(k=k, j=list(idx.j))
    return realize(_spline_blocks(d, order, 2.0**k, shift), head, np.zeros(1), order=order, meta=meta)


def compile_tensor_spline(d: int, order: int) -> ResKanNetwork:
    """x -> prod_k N_I(x_k): one spline layer feeding the product network."""
    return _spline_net(d, order, None, "tensor_spline")


def compile_mra_spline(d: int, order: int, idx: DyadicIndex) -> ResKanNetwork:
    """x -> prod_i N_I(2^k x_i - j_i); only the first layer's scales and shifts differ from the tensor spline."""
    return _spline_net(d, order, idx, "mra_spline")


def assemble_parallel(nets: Sequence[ResKanNetwork], weights: Sequence[float]) -> ResKanNetwork:
    """Side-by-side stack computing ``sum_i weights[i] * nets[i](x)``.

    All networks must share depth, input and output dimension, and order;
    shallower networks are not padded.
    """
    nets = list(nets)
    w = np.asarray(weights, dtype=float)
    if not nets:
        raise ValueError("need at least one network")
    if w.shape != (len(nets),):
        raise ValueError(f"got {w.shape[0] if w.ndim else 0} weights for {len(nets)} networks")
    first = nets[0]
    for i, n in enumerate(nets[1:], start=1):
        if n.depth != first.depth:
            raise ValueError(f"network {i} has depth {n.depth}, expected {first.depth}")
        if n.d_in != first.d_in or n.d_out != first.d_out:
            raise ValueError(f"network {i} maps R^{n.d_in} -> R^{n.d_out}, expected R^{first.d_in} -> R^{first.d_out}")
        if n.order != first.order:
            raise ValueError(f"network {i} has order {n.order}, expected {first.order}")
    head_A = np.hstack([wi * n.head_A for wi, n in zip(w, nets)])
    head_b = sum(wi * n.head_b for wi, n in zip(w, nets))
    if first.depth == 0:
        summed = sum(wi * n.head_A for wi, n in zip(w, nets))
        return ResKanNetwork((), summed, head_b, order=first.order, meta={"kind": "parallel", "count": len(nets)})
    blocks = []
    for li in range(first.depth):
        ls = [n.layers[li] for n in nets]
        n_out = sum(layer.d_out for layer in ls)
        n_in = first.d_in if li == 0 else sum(layer.d_in for layer in ls)
        A = np.zeros((n_out, n_in))
        G = np.zeros((n_out, n_in))
        ro = co = 0
        for layer in ls:
            cols = slice(0, first.d_in) if li == 0 else slice(co, co + layer.d_in)
            A[ro : ro + layer.d_out, cols] = layer.A
            G[ro : ro + layer.d_out, cols] = layer.G
            ro += layer.d_out
            co += layer.d_in
        blocks.append(
            BlockLayer(
                A,
                np.concatenate([layer.b for layer in ls]),
                G,
                np.hstack([layer.beta for layer in ls]),
            )
        )
    alpha = min(n.alpha for n in nets)
    return realize(blocks, head_A, head_b, order=first.order, alpha=alpha, meta={"kind": "parallel", "count": len(nets)})


@dataclass(frozen=True)
class GadgetSpec:
    kind: str
    d: int = 1
    order: int = 1
    idx: DyadicIndex | None = None

    def __post_init__(self) -> None:
        if self.kind not in GADGET_KINDS:
            raise ValueError(f"unknown gadget kind {self.kind!r}; choose from {', '.join(GADGET_KINDS)}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.kind == "mult_d" and self.d < 2:
            raise ValueError(f"mult_d requires d >= 2, got {self.d}")


def compile_gadget(spec: GadgetSpec) -> ResKanNetwork:
    if spec.kind == "square":
        return compile_square(spec.order)
    if spec.kind == "pair_mult":
        return compile_pair_multiplier(spec.order)
    if spec.kind == "mult_d":
        return compile_multiplier(spec.d, spec.order)
    if spec.kind == "tensor_spline":
        return compile_tensor_spline(spec.d, spec.order)
    idx = spec.idx if spec.idx is not None else DyadicIndex(0, (0,) * spec.d)
    return compile_mra_spline(spec.d, spec.order, idx)


__all__ = [
    "A_HEAD",
    "A_MERGE",
    "A_MULT",
    "A_SQUARE",
    "BlockLayer",
    "GadgetSpec",
    "assemble_parallel",
    "blocks_of",
    "compile_gadget",
    "compile_mra_spline",
    "compile_multiplier",
    "compile_pair_multiplier",
    "compile_square",
    "compile_tensor_spline",
    "multiplier_blocks",
    "realize",
]
