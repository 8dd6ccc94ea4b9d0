"""Perturbation factors, critical prices, and the difference formulas."""

import dataclasses

import numpy as np
import pytest

from sleepq import (
    ConsistencyError,
    DegeneratePriceError,
    GateError,
    critical_price_state,
    critical_prices_global,
    performance_difference,
    perturbation_factors,
    policy_profit,
    price_constant,
    realization_factors,
    sign_conservation_check,
    single_coordinate_difference,
    solve_poisson,
)
from conftest import draw_change_pair, draw_instance, micro_params, sleepy_params


def test_micro_sensitivity_values(micro):
    rep = perturbation_factors(micro, (1,))
    assert rep.prf[0] == pytest.approx(-3.22, abs=1e-12)
    assert rep.c == pytest.approx(9.5, abs=1e-15)
    assert rep.crit_prices[0] == pytest.approx(-5.7, abs=1e-12)
    assert rep.signs[0] == 1.0


def test_price_constant_formula(micro):
    k = ((micro.p2_work - micro.p2_sleep) * micro.c_energy) / micro.mu2
    assert price_constant(micro) == pytest.approx(micro.price - k, abs=1e-15)


def test_realization_factors_are_potential_differences():
    rng = np.random.default_rng(31)
    for _ in range(8):
        params, d = draw_instance(rng, n_max=8, m_max=8)
        sol = solve_poisson(params, d)
        prf = realization_factors(params, d)
        n, m = params.n, params.m
        direct = sol.g[n:n + m] - sol.g[n + 1:n + m + 1]
        assert np.allclose(prf, direct, atol=1e-9)


def test_prf_is_anchor_invariant(micro):
    a = realization_factors(micro, (1,))
    b = solve_poisson(micro, (1,), anchor=100.0)
    assert a[0] == pytest.approx(float(b.g[1] - b.g[2]), abs=1e-9)


def test_critical_price_solves_root():
    rng = np.random.default_rng(32)
    for _ in range(8):
        params, d = draw_instance(rng, n_max=6, m_max=6)
        j = 1 + int(rng.integers(params.m))
        try:
            root = critical_price_state(params, d, j)
        except DegeneratePriceError:
            continue
        at_root = dataclasses.replace(params, price=root)
        value = float(realization_factors(at_root, d)[j - 1]
                      + price_constant(at_root))
        assert abs(value) < 1e-7 * max(1.0, abs(root))


def test_g_plus_c_is_affine_in_price():
    rng = np.random.default_rng(33)
    params, d = draw_instance(rng, n_max=6, m_max=6)

    def value(r):
        at = dataclasses.replace(params, price=r)
        return realization_factors(at, d) + price_constant(at)

    v0, v5, v10 = value(0.0), value(5.0), value(10.0)
    assert np.allclose(v5, 0.5 * (v0 + v10), atol=1e-8)


def test_micro_difference_formula(micro):
    diff = performance_difference(micro, (0,), (1,))
    closed = single_coordinate_difference(micro, (0,), (1,))
    assert diff == pytest.approx(3.86 - 53 / 30, abs=1e-12)
    assert closed == pytest.approx(diff, abs=1e-12)


def test_difference_formula_random_pairs():
    rng = np.random.default_rng(34)
    for _ in range(30):
        params, _ = draw_instance(rng, n_max=8, m_max=8)
        d, d_prime, _ = draw_change_pair(rng, params.m)
        direct = policy_profit(params, d_prime) - policy_profit(params, d)
        general = performance_difference(params, d, d_prime)
        closed = single_coordinate_difference(params, d, d_prime)
        scale = max(1.0, abs(direct))
        assert abs(general - direct) < 1e-9 * scale
        assert abs(closed - direct) < 1e-9 * scale


def test_single_coordinate_domain_is_enforced(micro):
    params = micro_params(m=3)
    # differs in two coordinates
    with pytest.raises(ValueError, match="expected one"):
        single_coordinate_difference(params, (0, 0, 0), (1, 1, 0))
    # value above its level at the changed coordinate
    with pytest.raises(ValueError, match="in 0..2"):
        single_coordinate_difference(params, (0, 3, 0), (0, 1, 0))
    # identical policies change nothing
    with pytest.raises(ValueError, match="identical"):
        single_coordinate_difference(params, (0, 1, 0), (0, 1, 0))


def test_sign_conservation_micro(micro):
    rep = sign_conservation_check(micro, (0,), (1,), 1)
    assert not rep.degenerate
    assert rep.ratio == pytest.approx(5 / 3, abs=1e-12)
    assert rep.ratio == pytest.approx(rep.pi_ratio, rel=1e-12)


def test_sign_conservation_random_pairs():
    rng = np.random.default_rng(35)
    degenerate = 0
    for _ in range(40):
        params, _ = draw_instance(rng, n_max=8, m_max=8)
        d, d_prime, j = draw_change_pair(rng, params.m)
        rep = sign_conservation_check(params, d, d_prime, j)
        if rep.degenerate:
            degenerate += 1
            continue
        assert rep.rel_error < 1e-9
    assert degenerate <= 4


def test_critical_prices_global_micro(micro):
    crit = critical_prices_global(micro)
    assert crit.exact and crit.search_space == "full"
    assert crit.r_high == 0.0
    assert crit.r_low == pytest.approx(-5.7, abs=1e-12)


def test_critical_prices_sleepy_regime(sleepy):
    crit = critical_prices_global(sleepy)
    assert crit.r_low > 0
    assert crit.r_high > crit.r_low


def test_critical_prices_gate():
    params = micro_params(m=7)
    with pytest.raises(GateError, match="allow_large"):
        critical_prices_global(params)
    crit = critical_prices_global(params, "threshold")
    assert not crit.exact


def test_extremal_root_bounds_the_per_policy_roots(micro):
    crit = critical_prices_global(micro)
    rep = perturbation_factors(micro, (1,))
    assert crit.r_low <= rep.crit_prices[0] <= max(crit.r_high, 0.0)
