"""Generator matrix and stationary distribution of the policy-driven chain.

Under a policy the job count follows a birth-death process on the n + m + 1
states: births at rate lambda everywhere below the top state, deaths at rate
i*mu1 from (i, 0) and at rate nu(d_{n,j}) = n*mu1 + min(d_{n,j}, j)*mu2 from
(n, j). The stationary vector has a product form that the closed-form solver
builds by recursive ratios; a dense linear solve is kept as an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .model import ModelParams, Policy, StateSpace, check_policy, state_space


@dataclass(frozen=True)
class Generator:
    """Dense transition-rate matrix plus its state indexing.

    Rows sum to zero, off-diagonals are nonnegative, and the matrix is
    tridiagonal in the birth-death ordering of the state space.
    """

    matrix: np.ndarray
    space: StateSpace

    def __post_init__(self):
        self.matrix.setflags(write=False)


@dataclass(frozen=True)
class ChainSolution:
    """Stationary distribution pi with its unnormalized weights xi.

    pi = xi / b where xi(0,0) = 1 and b is the normalizing constant. All
    entries are strictly positive: every death rate is at least n*mu1 > 0,
    so the chain is irreducible.
    """

    pi: np.ndarray
    xi: np.ndarray
    b: float

    def __post_init__(self):
        self.pi.setflags(write=False)
        self.xi.setflags(write=False)


def service_rate(params: ModelParams, d: Policy, j: int) -> float:
    """Total departure rate nu(d_{n,j}) out of state (n, j), j in 1..m.

    Group 1 contributes n*mu1; Group 2 contributes min(d_{n,j}, j)*mu2
    because only as many awake servers as jobs can serve.
    """
    if not 1 <= j <= params.m:
        raise ValueError(f"level j must be in 1..{params.m}, got {j}")
    return params.n * params.mu1 + min(d[j - 1], j) * params.mu2


def build_generator(params: ModelParams, d: Policy) -> Generator:
    """Assemble the (n+m+1) x (n+m+1) transition-rate matrix."""
    d = check_policy(d, params.m)
    n, m = params.n, params.m
    lam, mu1 = params.lambda_, params.mu1
    size = n + m + 1
    matrix = np.zeros((size, size))

    for i in range(n + 1):
        if i > 0:
            matrix[i, i - 1] = i * mu1
        matrix[i, i + 1] = lam
    for j in range(1, m + 1):
        k = n + j
        matrix[k, k - 1] = service_rate(params, d, j)
        if j < m:
            matrix[k, k + 1] = lam
    # The top state has no birth: arrivals there are lost, not queued.
    np.fill_diagonal(matrix, 0.0)
    np.fill_diagonal(matrix, -matrix.sum(axis=1))
    return Generator(matrix, state_space(params))


def stationary_closed_form(params: ModelParams, d: Policy) -> ChainSolution:
    """Product-form stationary distribution.

    The balance equations telescope: xi(i,0) = lambda^i / (i! mu1^i) and
    xi(n,j) = xi(n,0) * lambda^j / prod_{i<=j} nu(d_{n,i}). Weights are
    accumulated as ratios xi_k = xi_{k-1} * birth/death, never through the
    factorial form, which overflows long before desk scale runs out.
    """
    d = check_policy(d, params.m)
    n, m = params.n, params.m
    lam, mu1 = params.lambda_, params.mu1
    xi = np.empty(n + m + 1)
    xi[0] = 1.0
    for i in range(1, n + 1):
        xi[i] = xi[i - 1] * lam / (i * mu1)
    for j in range(1, m + 1):
        xi[n + j] = xi[n + j - 1] * lam / service_rate(params, d, j)
    b = float(xi.sum())
    return ChainSolution(xi / b, xi, b)


def stationary_numeric(gen: Generator, replace_equation: int = -1) -> ChainSolution:
    """Solve pi B = 0, pi e = 1 by dense linear algebra (the oracle path).

    One balance equation (by default the last) is replaced by the
    normalization row; for an irreducible generator the result does not
    depend on which one. Entries whose true value sits far below machine
    precision come back as roundoff-scale negatives; those are clamped to
    zero. A genuinely negative entry raises NumericalError, as does a
    singular system; both indicate a malformed generator.
    """
    size = gen.matrix.shape[0]
    system = gen.matrix.T.copy()
    rhs = np.zeros(size)
    system[replace_equation, :] = 1.0
    rhs[replace_equation] = 1.0
    try:
        pi = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"stationary solve failed: {exc}") from exc
    if np.min(pi) < -1e-12 * np.max(pi):
        raise NumericalError("stationary solve produced negative entries")
    pi = np.maximum(pi, 0.0)
    pi /= pi.sum()
    if pi[0] <= 0.0:
        raise NumericalError("stationary solve lost the empty state")
    b = 1.0 / pi[0]
    return ChainSolution(pi, pi * b, b)
