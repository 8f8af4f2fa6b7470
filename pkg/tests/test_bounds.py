import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reskan.bounds import (
    BoundConfig,
    approximator_size,
    dictionary_rank,
    effective_smoothness,
    fat_shattering_bound,
    generalization_certificate,
    pdim_bound,
    sample_complexity,
    sample_complexity_terms,
)


def test_dictionary_rank():
    assert dictionary_rank(3, 2.0) == 4
    assert dictionary_rank(3, 0.0) == 6
    assert dictionary_rank(3, 2.5) == 3
    with pytest.raises(ValueError):
        dictionary_rank(2, 3.0)
    with pytest.raises(ValueError):
        dictionary_rank(0, 0.0)


def test_pdim_hand_value():
    # L=1, W=1, r=4: 1 * 1 * 4 * (log 4 + 1)
    assert pdim_bound(1, 1, 3, 2.0) == pytest.approx(4 * (math.log(4) + 1), rel=1e-15)
    assert pdim_bound(1, 1, 3, 2.0, BoundConfig(c=3.0)) == pytest.approx(12 * (math.log(4) + 1))


def test_log_base_switch():
    v = pdim_bound(2, 3, 3, 1.0, BoundConfig(log_base="2"))
    r = dictionary_rank(3, 1.0)
    assert v == pytest.approx(4 * 9 * r * (math.log2(r * 2 * 9) + 2))


@given(st.integers(1, 6), st.integers(1, 64), st.integers(1, 6))
def test_pdim_monotone_in_architecture(L, W, I):
    a = I / 2
    p = pdim_bound(L, W, I, a)
    assert pdim_bound(L + 1, W, I, a) > p
    assert pdim_bound(L, W + 1, I, a) > p
    assert pdim_bound(L, W, I + 1, a) > p


def test_fat_shattering_hand_value():
    gamma, L, W, I, alpha, d = 1 / 32, 1, 1, 3, 2.0, 1
    # log2(1/(8 gamma)) = 2, (8 gamma)^{-(d+1)/alpha} = 4
    expected = 4 * 4 * (math.log(4) + 1) + 4
    assert fat_shattering_bound(gamma, L, W, I, alpha, d) == pytest.approx(expected)


def test_fat_shattering_grows_as_gamma_shrinks():
    gs = np.geomspace(1e-4, 0.12, 30)
    vals = [fat_shattering_bound(g, 2, 16, 3, 2.0, 2) for g in gs]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        fat_shattering_bound(0.125, 2, 16, 3, 2.0, 2)


def test_sample_complexity_composition():
    eps, delta = 0.5, 0.1
    t = sample_complexity_terms(eps, delta, 1, 1, 3, 2.0, 1)
    assert t.A == pytest.approx(9 * 4 * (math.log(4) + 1))
    assert t.B == pytest.approx(8.0)
    AB = t.A + t.B
    assert t.N == pytest.approx(2 / eps**2 * (AB * math.log(AB / eps) ** 2 + math.log(1 / delta)))


@given(st.floats(0.01, 0.9), st.floats(0.001, 0.9))
def test_sample_complexity_monotone(eps, delta):
    args = (2, 16, 3, 2.0, 1)
    n = sample_complexity(eps, delta, *args)
    assert sample_complexity(eps * 0.9, delta, *args) > n
    assert sample_complexity(eps, delta * 0.5, *args) > n
    assert sample_complexity(eps, delta, 3, 16, 3, 2.0, 1) > n
    assert sample_complexity(eps, delta, 2, 16, 3, 2.0, 2) > n


def test_sample_complexity_guards():
    for eps, delta in [(0.0, 0.1), (1.0, 0.1), (0.1, 0.0), (0.1, 1.5)]:
        with pytest.raises(ValueError):
            sample_complexity(eps, delta, 2, 16, 3, 2.0, 1)


@given(st.floats(0.01, 0.9), st.floats(1e-6, 0.9), st.integers(1, 4))
def test_certificate_at_sample_complexity(eps, delta, d):
    N = sample_complexity(eps, delta, 2, 32, 3, 2.0, d)
    assert generalization_certificate(N, eps, 2, 32, 3, 2.0, d) <= delta


def test_certificate_is_monotone_and_capped():
    Ns = np.geomspace(1, 1e9, 40)
    vals = [generalization_certificate(N, 0.1, 2, 16, 3, 2.0, 1) for N in Ns]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert vals[0] == 1.0 and vals[-1] < 1e-6
    assert generalization_certificate(0, 0.1, 2, 16, 3, 2.0, 1) == 1.0


def test_effective_smoothness():
    assert effective_smoothness(2.0, 1.5, 2, 2.0) == pytest.approx(2.25)
    with pytest.raises(ValueError):
        effective_smoothness(2.0, 2.0, 2, 2.0)
    with pytest.raises(ValueError):
        effective_smoothness(2.0, 1.5, 2, 0.5)


def test_approximator_size_formula():
    size = approximator_size(0.25, 1.0, 2.0, 1)
    assert size.K == 1
    assert (size.width, size.depth, size.params) == (10, 1, 3)
    big = approximator_size(2**-6, 1.0, 3.0, 2)
    assert big.K == 2
    assert (big.width, big.depth, big.params) == (6 * 6, 3, 39 * 7)


def test_approximator_size_grows_as_eps_shrinks():
    sizes = [approximator_size(e, 1.0, 2.0, 2) for e in (0.5, 0.1, 0.01, 0.001)]
    assert all(b.width >= a.width and b.params >= a.params for a, b in zip(sizes, sizes[1:]))


def test_config_validation():
    with pytest.raises(ValueError):
        BoundConfig(c=0)
    with pytest.raises(ValueError):
        BoundConfig(c1=1.0)
    with pytest.raises(ValueError):
        BoundConfig(log_base="3")
