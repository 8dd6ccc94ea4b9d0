"""Perturbation realization factors, critical prices, difference formulas.

The realization factor G(n,j) = g(n,j-1) - g(n,j) measures the profit
effect of moving one queued job down a level; together with the constant
c = R - (P2W - P2S) C1 / mu2 it carries the whole dependence of the
average profit on single policy coordinates:

    eta' - eta = mu2 * pi'(n,j) * (d'_j - d_j) * [G(n,j) + c],

valid when both coordinate values lie in {0..j} (above j the service rate
saturates while the energy draw keeps rising, and the closed form no
longer matches the general difference equation).

G(n,j) + c is affine in the price R, so its root (the per-state critical
price) comes from two Poisson solves, at R = 0 and R = 1. Maximizing and
minimizing the roots over a policy space gives the global prices R_H and
R_L that delimit the all-awake and all-asleep optimal regimes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .chain import build_generator, stationary_closed_form
from .errors import ConsistencyError, DegeneratePriceError, GateError
from .model import ModelParams, Policy, check_policy, enumerate_policies
from .potential import solve_poisson
from .reward import build_reward

#: Full-space critical-price enumeration is gated tighter than plain
#: optimization: every policy costs two Poisson solves.
CRITICAL_PRICE_MAX_M = 6

#: Below this magnitude a G+c value or an R-slope is treated as degenerate.
DEGENERATE_EPS = 1e-12


@dataclass(frozen=True)
class SensitivityReport:
    """Realization factors and critical prices of one policy.

    prf[j-1] = G(n,j); crit_prices[j-1] is the root of G(n,j)+c in R (NaN
    where the R-slope is degenerate); signs[j-1] = sign(G(n,j)+c) at the
    instance's own price.
    """

    prf: np.ndarray
    c: float
    crit_prices: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        self.prf.setflags(write=False)
        self.crit_prices.setflags(write=False)
        self.signs.setflags(write=False)


@dataclass(frozen=True)
class CriticalPrices:
    """Global critical prices over a policy space.

    r_high = max{0, roots}; r_low = min{roots}. exact is True only when the
    full space was enumerated.
    """

    r_high: float
    r_low: float
    search_space: str
    exact: bool


@dataclass(frozen=True)
class SignConservationReport:
    """Both sides of the sign-conservation ratio for one coordinate change.

    ratio = [G^d(n,j)+c] / [G^d'(n,j)+c]; pi_ratio is the stationary
    probability ratio it must equal. degenerate marks near-zero G+c values
    where the ratio is not testable.
    """

    ratio: float
    pi_ratio: float
    rel_error: float
    degenerate: bool
    value_d: float
    value_d_prime: float


def price_constant(params: ModelParams) -> float:
    """c = R - (P2W - P2S) C1 / mu2."""
    return params.price - (params.p2_work - params.p2_sleep) * params.c_energy / params.mu2


def realization_factors(params: ModelParams, d: Policy,
                        method: str = "rg") -> np.ndarray:
    """G(n,j) = g(n,j-1) - g(n,j) for j = 1..m (anchor-free)."""
    sol = solve_poisson(params, d, method=method)
    n = params.n
    return sol.g[n:n + params.m] - sol.g[n + 1:n + params.m + 1]


def perturbation_factors(params: ModelParams, d: Policy,
                         method: str = "rg") -> SensitivityReport:
    """Realization factors, critical prices, and signs for one policy."""
    check_policy(d, params.m)
    prf = realization_factors(params, d, method=method)
    c = price_constant(params)

    g0 = realization_factors(dc_replace(params, price=0.0), d, method=method)
    g1 = realization_factors(dc_replace(params, price=1.0), d, method=method)
    slope = 1.0 + (g1 - g0)
    k = (params.p2_work - params.p2_sleep) * params.c_energy / params.mu2
    crit = np.where(np.abs(slope) < DEGENERATE_EPS, np.nan, (k - g0) / slope)

    return SensitivityReport(prf=prf, c=c, crit_prices=crit,
                             signs=np.sign(prf + c))


def critical_price_state(params: ModelParams, d: Policy, j: int,
                         method: str = "rg") -> float:
    """The price at which G(n,j) + c crosses zero under policy d.

    Solves the Poisson equation at R = 0 and R = 1; G + c is affine in R,
    so the root is (k - G|_{R=0}) / (1 + G|_{R=1} - G|_{R=0}) with
    k = (P2W - P2S) C1 / mu2.
    """
    check_policy(d, params.m)
    if not 1 <= j <= params.m:
        raise ValueError(f"j={j} outside 1..{params.m}")
    g0 = realization_factors(dc_replace(params, price=0.0), d, method=method)[j - 1]
    g1 = realization_factors(dc_replace(params, price=1.0), d, method=method)[j - 1]
    slope = 1.0 + (g1 - g0)
    k = (params.p2_work - params.p2_sleep) * params.c_energy / params.mu2
    if abs(slope) < DEGENERATE_EPS:
        sign = np.sign(g0 - k)
        raise DegeneratePriceError(
            f"G(n,{j})+c has no price crossing (R-slope {slope:.3e}); "
            f"its sign is {sign:+.0f} at every price"
        )
    return float((k - g0) / slope)


def critical_prices_global(params: ModelParams, space: str = "full",
                           allow_large: bool = False,
                           method: str = "rg") -> CriticalPrices:
    """R_H and R_L over a policy space.

    R_H = max{0, roots of G+c over all policies and levels}; R_L is the
    minimum root. Degenerate (no-crossing) levels are skipped. The full
    space is gated at m <= 6 because each policy costs two Poisson solves.
    """
    if space == "full" and params.m > CRITICAL_PRICE_MAX_M and not allow_large:
        raise GateError(
            f"full critical-price enumeration gated at m <= {CRITICAL_PRICE_MAX_M} "
            f"(got m={params.m}); pass allow_large=True to override"
        )
    k = (params.p2_work - params.p2_sleep) * params.c_energy / params.mu2
    params0 = dc_replace(params, price=0.0)
    params1 = dc_replace(params, price=1.0)

    r_high = 0.0
    r_low = np.inf
    seen_root = False
    for d in enumerate_policies(params.m, space, allow_large=allow_large):
        g0 = realization_factors(params0, d, method=method)
        g1 = realization_factors(params1, d, method=method)
        slope = 1.0 + (g1 - g0)
        for jj in range(params.m):
            if abs(slope[jj]) < DEGENERATE_EPS:
                continue
            root = (k - g0[jj]) / slope[jj]
            seen_root = True
            r_high = max(r_high, root)
            r_low = min(r_low, root)
    if not seen_root:
        r_low = np.nan
    return CriticalPrices(r_high=float(r_high), r_low=float(r_low),
                          search_space=space, exact=(space == "full"))


def performance_difference(params: ModelParams, d: Policy,
                           d_prime: Policy) -> float:
    """eta' - eta via the general difference equation.

    Returns pi'[(B' - B) g + (f' - f)] with g the potential of d; the
    anchor drops out because (B' - B) has zero row sums.
    """
    check_policy(d, params.m)
    check_policy(d_prime, params.m)
    sol = solve_poisson(params, d)
    b = build_generator(params, d).matrix
    b_prime = build_generator(params, d_prime).matrix
    f = build_reward(params, d)
    f_prime = build_reward(params, d_prime)
    pi_prime = stationary_closed_form(params, d_prime).pi
    return float(pi_prime @ ((b_prime - b) @ sol.g + (f_prime - f)))


def _single_change_level(params: ModelParams, d: Policy, d_prime: Policy,
                         j: int | None = None) -> int:
    """The 1-based level where d and d_prime differ (and nowhere else)."""
    check_policy(d, params.m)
    check_policy(d_prime, params.m)
    diffs = [i + 1 for i in range(params.m) if d[i] != d_prime[i]]
    if len(diffs) > 1:
        raise ValueError(f"policies differ at levels {diffs}, expected one")
    if j is None:
        if not diffs:
            raise ValueError("policies are identical; no changed level")
        j = diffs[0]
    elif diffs and diffs != [j]:
        raise ValueError(f"policies differ at level {diffs[0]}, not {j}")
    if d[j - 1] > j or d_prime[j - 1] > j:
        raise ValueError(
            f"closed form needs both coordinate values in 0..{j}; "
            f"got {d[j - 1]} and {d_prime[j - 1]} at level {j}"
        )
    return j


def single_coordinate_difference(params: ModelParams, d: Policy,
                                 d_prime: Policy) -> float:
    """eta' - eta for policies differing in one coordinate.

    Closed form mu2 * pi'(n,j) * (d'_j - d_j) * [G^d(n,j) + c]. Both
    coordinate values must lie in {0..j}.
    """
    j = _single_change_level(params, d, d_prime)
    prf = realization_factors(params, d)
    c = price_constant(params)
    pi_prime = stationary_closed_form(params, d_prime).pi
    return float(params.mu2 * pi_prime[params.n + j]
                 * (d_prime[j - 1] - d[j - 1]) * (prf[j - 1] + c))


def sign_conservation_check(params: ModelParams, d: Policy, d_prime: Policy,
                            j: int) -> SignConservationReport:
    """Check [G^d(n,j)+c] / [G^d'(n,j)+c] = pi^d(n,j) / pi^d'(n,j).

    Both sides are computed independently; disagreement beyond 1e-9
    relative raises. Near-zero G+c values make the left side untestable
    and are reported as degenerate instead.
    """
    _single_change_level(params, d, d_prime, j)
    c = price_constant(params)
    value_d = float(realization_factors(params, d)[j - 1] + c)
    value_dp = float(realization_factors(params, d_prime)[j - 1] + c)
    idx = params.n + j
    pi_ratio = float(stationary_closed_form(params, d).pi[idx]
                     / stationary_closed_form(params, d_prime).pi[idx])

    if min(abs(value_d), abs(value_dp)) < DEGENERATE_EPS:
        return SignConservationReport(
            ratio=np.nan, pi_ratio=pi_ratio, rel_error=np.nan,
            degenerate=True, value_d=value_d, value_d_prime=value_dp,
        )
    ratio = value_d / value_dp
    rel_error = abs(ratio - pi_ratio) / max(abs(pi_ratio), 1e-300)
    if rel_error > 1e-9:
        raise ConsistencyError(
            f"sign-conservation ratio {ratio!r} disagrees with stationary "
            f"ratio {pi_ratio!r} (rel error {rel_error:.3e})"
        )
    return SignConservationReport(
        ratio=ratio, pi_ratio=pi_ratio, rel_error=rel_error,
        degenerate=False, value_d=value_d, value_d_prime=value_dp,
    )
