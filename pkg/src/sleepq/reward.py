"""Profit-rate vector, its affine split in the price, and the average profit.

Each state earns revenue at price * (service completion rate) and pays for
energy (all n Group-1 servers work, d_{n,j} Group-2 servers work, the rest
sleep), holding, migrations of Group-2 jobs into freed Group-1 servers, and
lost arrivals at the full state. Writing the vector as f = R*a - b with R
the price makes every downstream quantity affine in R, which the
sensitivity module exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import ChainSolution
from .model import ModelParams, Policy, check_policy


@dataclass(frozen=True)
class AffineReward:
    """Coefficients of f = price * a - b.

    a holds the revenue rates (the completion rate of each state) and b the
    cost rates. The energy part of b uses the raw policy entry d_{n,j}: a
    server awake beyond the number of jobs burns power without serving, so b
    keeps growing in d_{n,j} even where a has saturated.
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a.setflags(write=False)
        self.b.setflags(write=False)


def affine_decomposition(params: ModelParams, d: Policy) -> AffineReward:
    d = check_policy(d, params.m)
    n, m = params.n, params.m
    mu1, mu2 = params.mu1, params.mu2
    size = n + m + 1

    a = np.empty(size)
    b = np.empty(size)
    base_energy = (n * params.p1_work + m * params.p2_sleep) * params.c_energy
    for i in range(n + 1):
        a[i] = i * mu1
        b[i] = base_energy + i * params.c_hold_g1
    for j in range(1, m + 1):
        dj = d[j - 1]
        a[n + j] = n * mu1 + min(dj, j) * mu2
        b[n + j] = (
            (n * params.p1_work + dj * params.p2_work
             + (m - dj) * params.p2_sleep) * params.c_energy
            + n * params.c_hold_g1
            + j * params.c_hold_g2
            + n * mu1 * params.c_transfer
        )
        if j == m:
            # Lost arrivals only happen at the full state.
            b[n + j] += params.lambda_ * params.c_loss
    return AffineReward(a, b)


def build_reward(params: ModelParams, d: Policy) -> np.ndarray:
    """Profit rate per state, f = price * a - b.

    Computed through the affine decomposition so that recombining at the
    model price reproduces f bit for bit.
    """
    aff = affine_decomposition(params, d)
    f = params.price * aff.a - aff.b
    f.setflags(write=False)
    return f


def average_profit(solution: ChainSolution, f: np.ndarray) -> float:
    """Long-run average profit eta = pi . f.

    Accumulated in extended precision: eta feeds the Poisson right-hand
    side, where its rounding error lands on the redundant balance equation
    divided by pi(0,0).
    """
    if solution.pi.shape != np.shape(f):
        raise ValueError(
            f"dimension mismatch: pi has {solution.pi.shape}, f has {np.shape(f)}"
        )
    return float(solution.pi.astype(np.longdouble) @ np.asarray(f, dtype=np.longdouble))


def profit_components(solution: ChainSolution, aff: AffineReward) -> tuple[float, float]:
    """(D, F) with D = pi . a and F = pi . b, so eta = price * D - F."""
    return float(solution.pi @ aff.a), float(solution.pi @ aff.b)


def policy_profit(params: ModelParams, d: Policy) -> float:
    """eta of a policy via the closed-form stationary distribution."""
    from .chain import stationary_closed_form

    return average_profit(stationary_closed_form(params, d), build_reward(params, d))
