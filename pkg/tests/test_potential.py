"""Poisson-equation solves, RG factorization, and normalizations."""

import numpy as np
import pytest

from sleepq import (
    ConsistencyError,
    build_generator,
    build_reward,
    invert_reduced,
    normalize_fundamental,
    poisson_residual,
    policy_profit,
    potential_for_price,
    reanchor,
    rg_factorize,
    solve_poisson,
    stationary_closed_form,
)
from sleepq.potential import SOLVE_METHODS, reduced_matrix
from conftest import draw_instance, micro_params


def test_micro_anchored_potentials(micro):
    sol = solve_poisson(micro, (1,))
    assert np.allclose(sol.g, [1.0, 7.36, 10.58], atol=1e-12)
    assert sol.eta == pytest.approx(3.86, abs=1e-12)
    assert sol.anchor == 1.0 and sol.normalization == "anchored"


def test_micro_rg_factors(micro):
    factors = rg_factorize(build_generator(micro, (1,)))
    assert np.allclose(factors.u, [-1.0, -2.0], atol=1e-15)
    assert np.allclose(factors.r, [0.5], atol=1e-15)
    assert np.allclose(factors.g, [1.0, 1.0], atol=1e-15)
    inv = invert_reduced(factors)
    assert np.allclose(inv, [[1.0, 0.5], [1.0, 1.0]], atol=1e-15)


def test_reduced_inverse_matches_dense():
    rng = np.random.default_rng(21)
    for _ in range(15):
        params, d = draw_instance(rng, n_max=10, m_max=10)
        gen = build_generator(params, d)
        inv = invert_reduced(rg_factorize(gen))
        dense = np.linalg.inv(-reduced_matrix(gen))
        scale = np.max(np.abs(dense))
        assert np.max(np.abs(inv - dense)) < 1e-11 * max(1.0, scale)


def test_all_methods_agree():
    rng = np.random.default_rng(22)
    for _ in range(10):
        params, d = draw_instance(rng, n_max=10, m_max=10)
        sols = [solve_poisson(params, d, method=m) for m in SOLVE_METHODS]
        for sol in sols[1:]:
            scale = max(1.0, float(np.max(np.abs(sols[0].g))))
            assert np.max(np.abs(sol.g - sols[0].g)) < 1e-9 * scale


def test_residual_is_small_on_random_instances():
    rng = np.random.default_rng(23)
    for _ in range(15):
        params, d = draw_instance(rng)
        sol = solve_poisson(params, d)
        gen = build_generator(params, d)
        f = build_reward(params, d)
        scale = max(1.0, abs(sol.eta), float(np.max(np.abs(f))))
        assert poisson_residual(gen, sol.g, sol.eta, f) < 1e-9 * scale
        assert sol.residual < 1e-9 * scale


def test_unit_inverse_identity():
    """mu1 times the first inverse column sums to one in every row."""
    rng = np.random.default_rng(24)
    for _ in range(15):
        params, d = draw_instance(rng)
        sol = solve_poisson(params, d)
        assert np.max(np.abs(sol.e1_term - 1.0)) < 1e-10


def test_anchor_shift_only_translates():
    rng = np.random.default_rng(25)
    params, d = draw_instance(rng, n_max=6, m_max=6)
    base = solve_poisson(params, d, anchor=0.0)
    shifted = reanchor(base, 2.5)
    assert shifted.anchor == 2.5
    assert np.allclose(shifted.g - base.g, 2.5, atol=1e-9)
    # differences of potentials are what the sensitivity layer consumes
    assert np.allclose(np.diff(shifted.g), np.diff(base.g), atol=1e-9)


def test_fundamental_normalization(micro):
    sol = solve_poisson(micro, (1,), normalization="fundamental")
    assert np.allclose(sol.g, [-0.6, 5.76, 8.98], atol=1e-12)
    pi = stationary_closed_form(micro, (1,)).pi
    assert float(pi @ sol.g) == pytest.approx(sol.eta, abs=1e-12)


def test_fundamental_is_idempotent(micro):
    sol = solve_poisson(micro, (1,), normalization="fundamental")
    pi = stationary_closed_form(micro, (1,))
    again = normalize_fundamental(sol, pi)
    assert np.allclose(again.g, sol.g, atol=1e-12)


def test_eta_consistency_gate(micro):
    sol = solve_poisson(micro, (1,), eta=3.86)
    assert sol.eta == pytest.approx(3.86, abs=1e-12)
    with pytest.raises(ConsistencyError):
        solve_poisson(micro, (1,), eta=3.9)


def test_unknown_method_and_normalization(micro):
    with pytest.raises(ValueError):
        solve_poisson(micro, (1,), method="cholesky")
    with pytest.raises(ValueError):
        solve_poisson(micro, (1,), normalization="mean-zero")


def test_potential_for_price(micro):
    sol = potential_for_price(micro, (1,), 0.0)
    direct = solve_poisson(micro_params(price=0.0), (1,))
    assert np.allclose(sol.g, direct.g, atol=1e-12)
    assert sol.eta == pytest.approx(policy_profit(micro_params(price=0.0), (1,)),
                                    abs=1e-12)


def test_poisson_defining_equation(micro):
    """B g equals eta*e - f row by row on the worked instance."""
    sol = solve_poisson(micro, (1,))
    gen = build_generator(micro, (1,))
    f = build_reward(micro, (1,))
    assert np.allclose(gen.matrix @ sol.g, sol.eta - f, atol=1e-12)
