from __future__ import annotations
import math
import time

import numpy as np
import pytest

from modexp.bounds import profile, upper_bound
from modexp.channel import InputDistribution, OutOfRange, random_channel
from modexp.dpt import (
    AlphaVector,
    _solve_gen_e,
    _weights,
    dpt_bound,
    dpt_prefactor,
    gen_e,
    gen_rd_lower,
    hoelder_constant,
    sup_q_gen_e,
    zeta,
    zeta_sum,
)
from modexp.errors import DomainError
from modexp.exponents import gallager_e0
from tests.conftest import BSC01_E0_1, LN2


def test_zeta_branches():
    for rho in (0.5, 1.0, 4.0):
        assert zeta(rho, 0.0) == 0.0
    assert zeta(1.0, 0.7) == pytest.approx(0.3)
    assert zeta(2.0, 1.0 / 3.0) == pytest.approx(1.0 / 3.0)
    assert zeta_sum(2.0, AlphaVector.symmetric(3)) == pytest.approx(1.0)
    with pytest.raises(OutOfRange):
        zeta(0.0, 0.5)
    with pytest.raises(OutOfRange):
        zeta(1.0, 1.5)


def test_alpha_vector():
    a = AlphaVector.from_free([0.2, 0.3])
    assert a.k == 3
    assert a.alphas[-1] == pytest.approx(0.5)
    with pytest.raises(DomainError):
        AlphaVector((0.5, 0.6))
    with pytest.raises(DomainError):
        AlphaVector((1.0,))


@pytest.mark.parametrize("seed", range(10))
def test_symmetric_weights_reduce_to_e0(seed):
    rng = np.random.default_rng(seed)
    k, m = (int(v) for v in rng.integers(2, 5, size=2))
    ch = random_channel(rng, k, m)
    q = InputDistribution.from_weights(rng.dirichlet(np.ones(k)))
    assert gen_e(ch, AlphaVector.symmetric(2), q) == pytest.approx(gallager_e0(ch, q, 1.0), abs=1e-12)
    assert gen_e(ch, AlphaVector.symmetric(3), q) == pytest.approx(gallager_e0(ch, q, 2.0), abs=1e-12)


def test_gen_e_useless(useless):
    q = InputDistribution.uniform(2)
    assert gen_e(useless, AlphaVector((0.2, 0.3, 0.5)), q) == pytest.approx(0.0, abs=1e-12)


def test_sup_q_gen_e(bsc01, identity2, useless, fast_settings):
    half = AlphaVector.symmetric(2)
    value, q = sup_q_gen_e(bsc01, half, fast_settings)
    assert value == pytest.approx(BSC01_E0_1, abs=1e-8)
    assert np.allclose(q.probs, 0.5, atol=1e-4)
    assert sup_q_gen_e(identity2, half, fast_settings)[0] == pytest.approx(LN2, abs=1e-8)
    assert sup_q_gen_e(useless, half, fast_settings)[0] == pytest.approx(0.0, abs=1e-12)


def test_q_search_leaves_a_vertex_quickly(bsc01):
    w = _weights(bsc01, (0.5, 0.5))
    value, q, gap, iters = _solve_gen_e(w, np.array([1.0, 0.0]), 20000, 1e-10)
    assert gap <= 1e-10
    assert iters < 500
    assert value == pytest.approx(BSC01_E0_1, abs=1e-9)
    assert np.allclose(q, 0.5, atol=1e-4)


def test_sup_q_gen_e_skewed_weights(fast_settings):
    ch = random_channel(np.random.default_rng(11), 3, 4)
    alphas = AlphaVector((0.2, 0.3, 0.5))
    value, q = sup_q_gen_e(ch, alphas, fast_settings)
    for w in ([1 / 3] * 3, [0.6, 0.2, 0.2], [0.1, 0.1, 0.8]):
        assert value >= gen_e(ch, alphas, InputDistribution.from_weights(w)) - 1e-9
    assert gen_e(ch, alphas, q) == pytest.approx(value, abs=1e-9)


def test_dpt_no_worse_than_channel_coding_bound(bsc01, fast_settings):
    result = dpt_bound(bsc01, 1.0, k_max=2, settings=fast_settings, starts=3)
    prof = profile(bsc01, fast_settings)
    assert result.value <= upper_bound(bsc01, 1.0, prof, fast_settings) + 1e-9
    assert result.best_k == 2
    assert result.to_dict()["best_alphas"] == pytest.approx(list(result.best_alphas.alphas))


@pytest.mark.slow
def test_dpt_bound_at_default_settings(bsc01):
    started = time.perf_counter()
    result = dpt_bound(bsc01, 1.0)
    elapsed = time.perf_counter() - started
    assert result.value <= upper_bound(bsc01, 1.0, profile(bsc01)) + 1e-9
    assert 2 <= result.best_k <= 4
    assert elapsed < 120.0


def test_dpt_useless(useless, fast_settings):
    assert dpt_bound(useless, 1.0, k_max=2, settings=fast_settings, starts=2).value == pytest.approx(0.0, abs=1e-12)


def test_dpt_rejects_bad_arguments(bsc01, fast_settings):
    with pytest.raises(DomainError):
        dpt_bound(bsc01, 0.0, settings=fast_settings)
    with pytest.raises(DomainError):
        dpt_bound(bsc01, 1.0, k_max=1, settings=fast_settings)


def test_hoelder_constants():
    c, c_prime = hoelder_constant(2.0, 0.5)
    assert c == pytest.approx(math.pi, rel=1e-9)
    assert c_prime == pytest.approx(math.sqrt(2.0) * math.pi, rel=1e-9)
    assert hoelder_constant(1.0, 1.0 / 3.0)[1] == pytest.approx(2.0 ** (11.0 / 6.0), rel=1e-12)
    assert hoelder_constant(1.0, 0.0)[1] == 1.0
    assert hoelder_constant(1.0, 1.0) == (0.0, 2.0)
    # the integral shrinks toward zero as alpha -> 1
    assert 0.0 < hoelder_constant(2.0, 0.99)[0] < hoelder_constant(2.0, 0.9)[0] < math.pi
    # rho * theta = 1 sits on the divergence boundary
    assert math.isinf(hoelder_constant(1.0, 0.5)[1])


def test_dpt_prefactor_is_product():
    alphas = AlphaVector((1.0 / 3.0, 2.0 / 3.0))
    expected = hoelder_constant(1.0, 1.0 / 3.0)[1] * hoelder_constant(1.0, 2.0 / 3.0)[1]
    assert dpt_prefactor(1.0, alphas) == pytest.approx(expected)


def test_gen_rd_lower_scaling():
    half = AlphaVector.symmetric(2)
    # sum zeta = 1, so the bound is linear in D
    assert gen_rd_lower(2.0, AlphaVector.symmetric(3), 0.01) / gen_rd_lower(2.0, AlphaVector.symmetric(3), 0.02) \
        == pytest.approx(0.5)
    values = [gen_rd_lower(0.5, half, d) for d in (0.1, 0.01, 0.001)]
    assert all(v < 0 for v in values)
    assert values[0] < values[1] < values[2]
    with pytest.raises(OutOfRange):
        gen_rd_lower(1.0, half, 0.0)
