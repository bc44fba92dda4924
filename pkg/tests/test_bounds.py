from __future__ import annotations
import math

import numpy as np
import pytest

from modexp.bounds import (
    BRANCH_EXPURGATED,
    BRANCH_MIDDLE,
    BRANCH_RANDOM,
    InfiniteExpurgated,
    MultiDimWeights,
    RegimeMismatch,
    achieving_rate,
    fixed_point_rate,
    lower_bound,
    multidim_bound,
    opt_rate,
    profile,
    sandwich_ratio,
    upper_bound,
)
from modexp.errors import DomainError
from modexp.exponents import capacity, uce_e0
from tests.conftest import BSC01_CAPACITY, BSC01_E0_1, BSC01_E_EX0, BSC01_R_MINUS, BSC01_R_PLUS


@pytest.fixture(scope="module")
def bsc_prof(bsc01, fast_settings):
    return profile(bsc01, fast_settings)


@pytest.fixture(scope="module")
def vnc_prof(vnc_channel, fast_settings):
    return profile(vnc_channel, fast_settings)


def test_bsc_profile_constants(bsc_prof):
    assert bsc_prof.capacity == pytest.approx(BSC01_CAPACITY, abs=1e-6)
    assert bsc_prof.e0_at_1 == pytest.approx(BSC01_E0_1, abs=1e-6)
    assert bsc_prof.e_ex0 == pytest.approx(BSC01_E_EX0, abs=1e-6)
    assert bsc_prof.r_minus == pytest.approx(BSC01_R_MINUS, abs=1e-6)
    assert bsc_prof.r_plus == pytest.approx(BSC01_R_PLUS, abs=1e-6)
    assert bsc_prof.rho_plus == pytest.approx(0.7058, abs=1e-3)
    assert bsc_prof.rho_minus == pytest.approx(6.065, abs=1e-2)
    assert 1.0 < bsc_prof.rho0 < 10.0
    assert not bsc_prof.infinite_expurgated


def test_profile_to_dict_is_plain(bsc_prof):
    d = bsc_prof.to_dict()
    assert d["q"] == pytest.approx([0.5, 0.5])
    assert set(d) >= {"capacity", "e_ex0", "rho0", "r0", "r_minus", "r_plus"}


def test_profile_flags_infinite_expurgated(identity2, fast_settings):
    prof = profile(identity2, fast_settings)
    assert prof.infinite_expurgated
    assert math.isinf(prof.rho0)
    assert math.isnan(prof.r0)
    with pytest.raises(InfiniteExpurgated):
        profile(identity2, fast_settings, strict=True)


def test_vnc_rho0_is_one(vnc_prof):
    assert vnc_prof.rho0 == pytest.approx(1.0, rel=0.1)


def test_upper_bound(bsc01, useless, vnc_channel, bsc_prof, vnc_prof, fast_settings):
    cap = vnc_prof.capacity
    assert upper_bound(vnc_channel, 0.5, vnc_prof, fast_settings) == pytest.approx(cap / 3, rel=0.05)
    assert upper_bound(vnc_channel, 2.0, vnc_prof, fast_settings) == pytest.approx(cap / 2, rel=0.05)
    uprof = profile(useless, fast_settings)
    for rho in (0.5, 5.0):
        assert upper_bound(useless, rho, uprof, fast_settings) == pytest.approx(0.0, abs=1e-12)
    assert upper_bound(bsc01, 50.0, bsc_prof, fast_settings) == bsc_prof.e_ex0
    with pytest.raises(DomainError):
        upper_bound(bsc01, -1.0, bsc_prof, fast_settings)


def test_lower_bound_vnc(vnc_channel, vnc_prof, fast_settings):
    cap = vnc_prof.capacity
    assert lower_bound(vnc_channel, 0.25, vnc_prof, fast_settings).value == pytest.approx(cap / 9, rel=0.05)
    assert lower_bound(vnc_channel, 1.0, vnc_prof, fast_settings).value == pytest.approx(cap / 4, rel=0.05)


def test_lower_bound_branches(bsc01, bsc_prof, fast_settings):
    assert lower_bound(bsc01, 0.5, bsc_prof, fast_settings).branch == BRANCH_RANDOM
    middle = lower_bound(bsc01, 2.0, bsc_prof, fast_settings)
    assert middle.branch == BRANCH_MIDDLE
    assert middle.value == pytest.approx(2.0 * BSC01_E0_1 / 3.0, abs=1e-9)
    assert lower_bound(bsc01, 10.0, bsc_prof, fast_settings).branch == BRANCH_EXPURGATED
    assert lower_bound(bsc01, 0.0, bsc_prof, fast_settings).value == 0.0


def test_lower_below_upper(bsc01, bsc_prof, fast_settings):
    for rho in np.geomspace(0.01, 100, 9):
        lower = lower_bound(bsc01, float(rho), bsc_prof, fast_settings).value
        assert lower <= upper_bound(bsc01, float(rho), bsc_prof, fast_settings) + 1e-9


def test_useless_channel_bounds(useless, fast_settings):
    prof = profile(useless, fast_settings)
    assert lower_bound(useless, 1.0, prof, fast_settings).value == pytest.approx(0.0, abs=1e-12)
    assert opt_rate(useless, 1.0, prof, fast_settings) == pytest.approx(0.0, abs=1e-12)
    assert sandwich_ratio(useless, 1.0, prof, fast_settings) == 1.0


def test_small_rho_limit(bsc01, bsc_prof, fast_settings):
    # the achievable rate approaches C like sqrt(rho); at 1e-4 it is already 1.5% short
    assert opt_rate(bsc01, 1e-5, bsc_prof, fast_settings) == pytest.approx(BSC01_CAPACITY, rel=0.02)
    rho = 1e-4
    assert upper_bound(bsc01, rho, bsc_prof, fast_settings) / rho == pytest.approx(BSC01_CAPACITY, rel=0.02)


def test_large_rho_limit(bsc01, bsc_prof, fast_settings):
    rho = 1e4
    assert lower_bound(bsc01, rho, bsc_prof, fast_settings).value == pytest.approx(BSC01_E_EX0, rel=0.02)
    assert upper_bound(bsc01, rho, bsc_prof, fast_settings) == pytest.approx(BSC01_E_EX0, rel=0.02)


def test_opt_rate_vnc(vnc_channel, vnc_prof, fast_settings):
    assert opt_rate(vnc_channel, 4.0, vnc_prof, fast_settings) == pytest.approx(vnc_prof.capacity / 10, rel=0.05)


def test_fixed_point_rate_matches_sup_form(bsc01, bsc_prof, fast_settings):
    for rho in (8.0, 15.0):
        root = fixed_point_rate(bsc01, rho, bsc_prof, fast_settings)
        assert root == pytest.approx(opt_rate(bsc01, rho, bsc_prof, fast_settings), abs=1e-6)
    for rho in (0.2, 0.6):
        root = fixed_point_rate(bsc01, rho, bsc_prof, fast_settings)
        assert root == pytest.approx(opt_rate(bsc01, rho, bsc_prof, fast_settings), abs=1e-6)


@pytest.mark.slow
def test_fixed_point_rate_matches_sup_form_across_regimes(bsc01, bsc_prof, fast_settings):
    expurgated = np.linspace(bsc_prof.rho_minus * 1.05, 20.0, 21)[1:]
    random_coding = np.linspace(0.0, 0.95 * bsc_prof.rho_plus, 22)[1:-1]
    assert len(expurgated) == len(random_coding) == 20
    for rho in np.concatenate([expurgated, random_coding]):
        root = fixed_point_rate(bsc01, float(rho), bsc_prof, fast_settings)
        assert root == pytest.approx(opt_rate(bsc01, float(rho), bsc_prof, fast_settings), abs=1e-6)


def test_fixed_point_rate_vnc(vnc_channel, vnc_prof, fast_settings):
    root = fixed_point_rate(vnc_channel, 0.25, vnc_prof, fast_settings)
    assert root == pytest.approx(4 * vnc_prof.capacity / 9, rel=0.05)


def test_fixed_point_rate_middle_band(bsc01, bsc_prof, fast_settings):
    with pytest.raises(RegimeMismatch):
        fixed_point_rate(bsc01, 2.0, bsc_prof, fast_settings)


def test_multidim_reduces_to_scalar(bsc01, bsc_prof, fast_settings):
    one = MultiDimWeights(1, (0.0,))
    two = MultiDimWeights(2, (0.0, 0.0))
    for rho in (0.3, 1.0, 3.0, 20.0):
        upper = upper_bound(bsc01, rho, bsc_prof, fast_settings)
        assert multidim_bound(bsc01, rho, one, bsc_prof, fast_settings) == pytest.approx(upper, abs=1e-12)
        half = upper_bound(bsc01, rho / 2, bsc_prof, fast_settings)
        assert multidim_bound(bsc01, rho, two, bsc_prof, fast_settings) == pytest.approx(half, abs=1e-9)


def test_multidim_vnc(vnc_channel, vnc_prof, fast_settings):
    cap = vnc_prof.capacity
    zero = MultiDimWeights(2, (0.0, 0.0))
    assert multidim_bound(vnc_channel, 2.0, zero, vnc_prof, fast_settings) == pytest.approx(cap / 2, rel=0.05)
    tilted = MultiDimWeights(2, (0.0, 0.1))
    expected = uce_e0(vnc_channel, 0.5, fast_settings) - 0.05
    assert multidim_bound(vnc_channel, 1.0, tilted, vnc_prof, fast_settings) == pytest.approx(expected, abs=1e-12)


def test_multidim_weights_validation():
    with pytest.raises(DomainError):
        MultiDimWeights(2, (0.1, 0.2))
    with pytest.raises(DomainError):
        MultiDimWeights(2, (0.0,))
    w = MultiDimWeights.shifted([0.3, 0.5])
    assert w.r == pytest.approx((0.0, 0.2))
    assert w.total == pytest.approx(0.2)


def test_achieving_rate_without_penalty_is_capacity(bsc01, fast_settings):
    assert achieving_rate(bsc01, 0.0, 0.0, fast_settings) == pytest.approx(capacity(bsc01, fast_settings), abs=1e-6)
    assert achieving_rate(bsc01, 1.0, 0.5, fast_settings) == 0.5


def test_sandwich_ratio_bsc(bsc01, bsc_prof, fast_settings):
    for rho in (0.1, 1.0, 10.0):
        assert 0.0 < sandwich_ratio(bsc01, rho, bsc_prof, fast_settings) <= 1.0 + 1e-9
