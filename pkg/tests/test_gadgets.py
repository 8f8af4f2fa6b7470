import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reskan.gadgets import (
    A_HEAD,
    A_MERGE,
    A_MULT,
    GadgetSpec,
    assemble_parallel,
    blocks_of,
    compile_gadget,
    compile_mra_spline,
    compile_multiplier,
    compile_pair_multiplier,
    compile_square,
    compile_tensor_spline,
    multiplier_blocks,
    relu2_row,
    relu_row,
)
from reskan.network import count_stats, layer_forward, validate_sparsity
from reskan.splines import DyadicIndex, eval_mra, eval_tensor


def multiplier_count(d):
    """Nonzeros tallied unit by unit from the textbook blocks.

    Unit 1: A_mult (8) + six ReLU^2 selectors + the second map [A_head; -A_head] (12)
    + two ReLU selectors, plus d-2 pass-through gates in each of its two layers.
    Unit l >= 2 swaps A_mult for A_merge (12) and forwards d-l-1 coordinates.
    The head (1, -1) adds 2.
    """
    total = 2 + (8 + 6 + 12 + 2) + 2 * (d - 2)
    for unit in range(2, d):
        total += (12 + 6 + 12 + 2) + 2 * (d - unit - 1)
    return total


# square and pair -----------------------------------------------------------------


@given(st.floats(min_value=-1e4, max_value=1e4))
def test_square_is_exact(t):
    assert compile_square()([t])[0] == t * t


def test_square_examples():
    net = compile_square()
    assert net([-3.0])[0] == 9.0
    assert net([0.0])[0] == 0.0
    assert count_stats(net).nonzero_params == 6


@given(st.floats(min_value=-1e3, max_value=1e3), st.floats(min_value=-1e3, max_value=1e3))
def test_pair_multiplier_is_exact(u, v):
    assert compile_pair_multiplier()([u, v])[0] == pytest.approx(u * v, rel=1e-12, abs=1e-9)


def test_pair_multiplier_examples():
    net = compile_pair_multiplier()
    assert net([2.0, -1.5])[0] == -3.0
    assert net([0.0, 17.0])[0] == 0.0
    assert count_stats(net).nonzero_params == 20
    assert np.array_equal(net.layers[0].A, A_MULT)
    assert np.array_equal(net.head_A, A_HEAD)


def test_paper_matrices():
    assert A_MULT.shape == (6, 2) and np.count_nonzero(A_MULT) == 8
    assert np.array_equal(A_HEAD * 2, [[1, 1, -1, -1, -1, -1]])
    # rows of A_merge: (p + x), -(p + x), p, -p, x, -x on inputs (ReLU(p), ReLU(-p), x)
    relu_pair = lambda p: np.array([max(p, 0.0), max(-p, 0.0)])  # noqa: E731
    for p, x in [(2.0, 3.0), (-1.5, 0.5), (0.0, -4.0)]:
        out = A_MERGE @ np.concatenate([relu_pair(p), [x]])
        assert np.allclose(out, [p + x, -(p + x), p, -p, x, -x])


# d-fold multiplier -----------------------------------------------------------------


@pytest.mark.parametrize(
    "d,x,expected", [(3, (1.0, 2.0, 3.0), 6.0), (4, (1.0, -1.0, 1.0, -1.0), 1.0), (2, (3.0, -2.0), -6.0)]
)
def test_multiplier_examples(d, x, expected):
    assert compile_multiplier(d)(x)[0] == expected


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=2, max_value=7), st.integers(min_value=0, max_value=2**31))
def test_multiplier_exact_property(d, seed):
    x = np.random.default_rng(seed).uniform(-10, 10, size=(20, d))
    out = compile_multiplier(d)(x)[:, 0]
    prod = np.prod(x, axis=1)
    assert np.all(np.abs(out - prod) <= 1e-9 * np.maximum(1.0, np.abs(prod)))


def test_multiplier_exact_far_outside_unit_cube():
    x = np.array([[1e3, -2e3, 5e2], [-7.0, 1e4, 3e-3]])
    out = compile_multiplier(3)(x)[:, 0]
    assert out[0] == pytest.approx(-1e9, rel=1e-14)
    # polarisation cancels (p+x)^2 - p^2 - x^2, so round-off scales with the squares
    p, last = -7e4, 3e-3
    assert abs(out[1] - p * last) <= 8 * np.finfo(float).eps * (abs(p) + abs(last)) ** 2


@pytest.mark.parametrize("d", range(2, 9))
def test_multiplier_shape(d):
    stats = count_stats(compile_multiplier(d))
    assert stats.depth == 2 * (d - 1)
    assert stats.width <= d + 4
    assert stats.nonzero_params == multiplier_count(d) == d * d + 29 * d - 32


@pytest.mark.parametrize("d", [2, 3, 5])
def test_multiplier_blocks_match_textbook_layout(d):
    net = compile_multiplier(d)
    blocks = blocks_of(net)
    r1, r2 = relu_row(1), relu2_row(1)
    second = np.vstack([A_HEAD, -A_HEAD])
    for unit in range(1, d):
        first, sec = blocks[2 * (unit - 1)], blocks[2 * unit - 1]
        top = A_MULT if unit == 1 else A_MERGE
        assert np.array_equal(first.A[:6, : top.shape[1]], top)
        assert np.array_equal(sec.A[:2, :6], second)
        assert np.array_equal(first.beta[r2, :6], np.ones(6))
        assert np.array_equal(sec.beta[r1, :2], np.ones(2))
        rest = first.A.shape[1] - top.shape[1]
        # pass-through coordinates ride the gates, never the affine map
        assert np.array_equal(first.G[6:, top.shape[1] :], np.eye(rest))
        assert not first.A[6:].any() and not first.G[:6].any()
    for got, ref in zip(blocks, multiplier_blocks(d, 1)):
        assert np.array_equal(got.A, ref.A) and np.array_equal(got.G, ref.G)


def test_merge_identity_on_intermediate_channels():
    d = 4
    net = compile_multiplier(d)
    perms = net.meta["channel_perms"]
    rng = np.random.default_rng(3)
    x = rng.uniform(-5, 5, size=(50, d))
    h = x
    partial = np.ones(len(x))
    factors = x[:, ::-1]  # block input c is coordinate d-1-c
    for li, layer in enumerate(net.layers):
        h = layer_forward(layer, h)
        if li % 2 == 1:
            unit = li // 2 + 1
            partial = partial * factors[:, unit] * (factors[:, 0] if unit == 1 else 1.0)
            p_idx = perms[li + 1]
            pos, neg = h[:, p_idx[0]], h[:, p_idx[1]]
            assert np.all(pos >= 0) and np.all(neg >= 0)
            assert np.allclose(pos - neg, partial, rtol=1e-12, atol=1e-9)


def test_multiplier_rejects_single_factor():
    with pytest.raises(ValueError):
        compile_multiplier(1)
    with pytest.raises(ValueError):
        GadgetSpec("mult_d", d=1)


# splines ---------------------------------------------------------------------------


@pytest.mark.parametrize("d,order", [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)])
def test_tensor_spline_matches_oracle(d, order):
    x = np.random.default_rng(d * 10 + order).uniform(-1, order + 2, size=(1000, d))
    assert np.max(np.abs(compile_tensor_spline(d, order)(x)[:, 0] - eval_tensor(order, x))) <= 1e-12


def test_tensor_spline_examples():
    assert compile_tensor_spline(2, 1)([1.0, 1.0])[0] == 1.0
    assert compile_tensor_spline(2, 2)([1.5, 1.5])[0] == pytest.approx(0.5625, abs=1e-15)


@pytest.mark.parametrize("d", range(2, 9))
def test_tensor_spline_shape(d):
    stats = count_stats(compile_tensor_spline(d, 1))
    assert stats.depth == 2 * d - 1
    assert stats.width <= d + 4
    # the spline layer adds d affine scales and d spline selectors to the product network
    assert stats.nonzero_params == multiplier_count(d) + 2 * d == d * d + 31 * d - 32


def test_tensor_spline_one_dimension_is_single_layer():
    net = compile_tensor_spline(1, 2)
    assert net.depth == 1
    x = np.linspace(-1, 4, 51)
    assert np.allclose(net(x[:, None])[:, 0], eval_tensor(2, x[:, None]), atol=1e-15)


def test_mra_examples():
    assert compile_mra_spline(1, 1, DyadicIndex(1, (0,)))([0.5])[0] == 1.0
    x = np.random.default_rng(0).uniform(-1, 3, size=(100, 2))
    same = compile_mra_spline(2, 1, DyadicIndex(0, (0, 0)))
    assert np.array_equal(same(x), compile_tensor_spline(2, 1)(x))


def test_mra_differs_only_in_first_layer_scales_and_shifts():
    base = compile_tensor_spline(3, 1)
    mra = compile_mra_spline(3, 1, DyadicIndex(2, (1, -1, 3)))
    diff = 0
    for la, lb in zip(base.layers, mra.layers):
        for name in ("A", "b", "g", "beta"):
            diff += int(np.count_nonzero(getattr(la, name) != getattr(lb, name)))
    diff += int(np.count_nonzero(base.head_A != mra.head_A))
    assert diff == 6


@settings(max_examples=40, deadline=None)
@given(
    st.integers(min_value=1, max_value=3),
    st.integers(min_value=1, max_value=3),
    st.integers(min_value=0, max_value=4),
    st.integers(min_value=0, max_value=2**31),
)
def test_mra_matches_oracle(d, order, k, seed):
    rng = np.random.default_rng(seed)
    j = tuple(int(v) for v in rng.integers(-order, 2**k, size=d))
    idx = DyadicIndex(k, j)
    x = rng.uniform(-0.5, 1.5, size=(50, d))
    assert np.max(np.abs(compile_mra_spline(d, order, idx)(x)[:, 0] - eval_mra(order, idx, x))) <= 1e-12


def test_gadgets_satisfy_low_smoothness_pattern():
    nets = [
        compile_square(),
        compile_pair_multiplier(),
        compile_multiplier(4),
        compile_tensor_spline(3, 1),
        compile_tensor_spline(2, 3),
        compile_mra_spline(2, 2, DyadicIndex(1, (0, 1))),
    ]
    for net in nets:
        assert validate_sparsity(net, alpha=1.0) == []
    # a first-order spline cannot carry two derivatives
    assert validate_sparsity(compile_tensor_spline(2, 1), alpha=2.0)


# parallel assembly ---------------------------------------------------------------------


def test_parallel_cancellation():
    net = assemble_parallel([compile_square(), compile_square()], [1.0, -1.0])
    x = np.random.default_rng(0).normal(size=(100, 1)) * 5
    assert np.array_equal(net(x), np.zeros((100, 1)))


def test_parallel_single_network():
    base = compile_multiplier(3)
    net = assemble_parallel([base], [1.0])
    x = np.random.default_rng(1).uniform(-3, 3, size=(100, 3))
    assert np.array_equal(net(x), base(x))


@given(st.lists(st.floats(min_value=-5, max_value=5), min_size=1, max_size=4), st.integers(0, 2**31))
@settings(deadline=None, max_examples=30)
def test_parallel_is_weighted_sum(weights, seed):
    rng = np.random.default_rng(seed)
    nets = [
        compile_mra_spline(2, 2, DyadicIndex(int(rng.integers(0, 3)), tuple(int(v) for v in rng.integers(-2, 3, 2))))
        for _ in weights
    ]
    x = rng.uniform(0, 1, size=(30, 2))
    expected = sum(w * n(x) for w, n in zip(weights, nets))
    assert np.allclose(assemble_parallel(nets, weights)(x), expected, atol=1e-12)


def test_parallel_width_bound_one_level():
    order, K, d = 1, 1, 1
    nets = [compile_mra_spline(d, order, DyadicIndex(k, (j,))) for k in range(K + 1) for j in range(-order, 2**k)]
    net = assemble_parallel(nets, np.ones(len(nets)))
    assert count_stats(net).width <= (d + 4) * (2 ** (K + 1) - 2)
    assert net.depth == 1


def test_parallel_rejects_depth_mismatch():
    with pytest.raises(ValueError, match="depth"):
        assemble_parallel([compile_square(), compile_multiplier(2)], [1.0, 1.0])
    with pytest.raises(ValueError):
        assemble_parallel([compile_square()], [1.0, 2.0])
    with pytest.raises(ValueError):
        assemble_parallel([], [])


# specs ---------------------------------------------------------------------------------


@pytest.mark.parametrize(
    "spec,x,expected",
    [
        (GadgetSpec("square"), [4.0], 16.0),
        (GadgetSpec("pair_mult", d=2), [4.0, 0.5], 2.0),
        (GadgetSpec("mult_d", d=3), [1.0, 2.0, -2.0], -4.0),
        (GadgetSpec("tensor_spline", d=2, order=1), [1.0, 0.5], 0.5),
        (GadgetSpec("mra_spline", d=1, order=1, idx=DyadicIndex(1, (0,))), [0.5], 1.0),
        (GadgetSpec("mra_spline", d=2, order=1), [1.0, 1.0], 1.0),
    ],
)
def test_compile_gadget(spec, x, expected):
    assert compile_gadget(spec)(x)[0] == expected


def test_gadget_spec_validation():
    with pytest.raises(ValueError, match="unknown"):
        GadgetSpec("cube")
    with pytest.raises(ValueError):
        GadgetSpec("square", d=0)
