"""Discrete-event simulation of the two-group cluster under a policy.

An analytics-free oracle: the physical system is simulated by competing
exponential clocks (single total-rate dwell draw plus a proportional
selection draw), tallying revenue per completion, transfer and loss costs
per event, and energy/holding costs as time integrals. The profit
estimate is the pooled ratio of tallies to elapsed time, so the reported
decomposition reproduces eta_hat exactly.

Randomness comes from counter-based Philox streams, one per replication,
seeded as SeedSequence((seed, replication)); identical configurations
reproduce bit-identical results. Batch-means confidence intervals use the
post-warmup batches of a single replication, or the per-replication
estimates when there are several.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _simkernel
from ._simkernel import DONE, REFILL
from .errors import ConfigError
from .model import ModelParams, Policy, check_policy, require_valid, state_space

#: Uniforms drawn per refill; results do not depend on this value.
BUFFER_SIZE = 1 << 16

#: Stand-in event budget when a segment is limited by time only.
_NO_EVENT_LIMIT = np.iinfo(np.int64).max // 2


@dataclass(frozen=True)
class SimConfig:
    """Run lengths and replication layout for one simulation.

    horizon is an event budget when unit="events" (the default) or an
    amount of simulated time when unit="time". warmup below 1 is a
    fraction of the horizon; warmup >= 1 is absolute in the same unit as
    the horizon. batch_count batches split the post-warmup stretch for
    the confidence interval, so it must be at least 2 when there is a
    single replication.
    """

    horizon: float
    warmup: float = 0.1
    replications: int = 1
    seed: int = 0
    batch_count: int = 20
    unit: str = "events"

    def resolved_warmup(self) -> float:
        if self.warmup < 1.0:
            return self.warmup * self.horizon
        return float(self.warmup)


@dataclass(frozen=True)
class EventCounts:
    """Post-warmup event tallies, summed over replications."""

    completions_g1: int
    completions_g2: int
    transfers: int
    losses: int
    events: int

    @property
    def completions(self) -> int:
        return self.completions_g1 + self.completions_g2


@dataclass(frozen=True)
class SimResult:
    """Estimates from the post-warmup portion of all replications.

    eta_hat = (R*completions - energy_integral - holding_integral
    - C3*transfers - C4*losses) / total_time, exactly, from the reported
    tallies. pi_hat is the normalized time-in-state occupancy.
    batch_records rows are (replication, batch, batch_time, batch_eta)
    with matching per-batch occupancy rows in batch_pi.
    """

    eta_hat: float
    ci_half_width: float
    pi_hat: np.ndarray
    counts: EventCounts
    total_time: float
    energy_integral: float
    holding_integral: float
    replication_etas: np.ndarray
    batch_records: np.ndarray
    batch_pi: np.ndarray
    trace: list | None = None

    def __post_init__(self):
        self.pi_hat.setflags(write=False)
        self.replication_etas.setflags(write=False)
        self.batch_records.setflags(write=False)
        self.batch_pi.setflags(write=False)


def _validate_config(cfg: SimConfig) -> None:
    if cfg.unit not in ("events", "time"):
        raise ConfigError(f"unit must be 'events' or 'time', got {cfg.unit!r}")
    if not np.isfinite(cfg.horizon) or cfg.horizon <= 0:
        raise ConfigError(f"horizon must be positive, got {cfg.horizon!r}")
    if cfg.warmup < 0 or not np.isfinite(cfg.warmup):
        raise ConfigError(f"warmup must be nonnegative, got {cfg.warmup!r}")
    if cfg.resolved_warmup() >= cfg.horizon:
        raise ConfigError(
            f"warmup {cfg.resolved_warmup()!r} must be below the horizon "
            f"{cfg.horizon!r}"
        )
    if cfg.replications < 1:
        raise ConfigError("replications must be >= 1")
    if cfg.batch_count < 1:
        raise ConfigError("batch_count must be >= 1")
    if cfg.replications == 1 and cfg.batch_count < 2:
        raise ConfigError(
            "batch_count must be >= 2 with a single replication, or the "
            "confidence interval is undefined"
        )
    if cfg.seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    if cfg.unit == "events" and cfg.horizon != int(cfg.horizon):
        raise ConfigError("event-mode horizon must be a whole number")


def _rates(params: ModelParams, d: Policy):
    n, m = params.n, params.m
    size = n + m + 1
    g1 = np.zeros(size)
    g2 = np.zeros(size)
    energy = np.zeros(size)
    hold = np.zeros(size)
    base_energy = (n * params.p1_work + m * params.p2_sleep) * params.c_energy
    for i in range(n + 1):
        g1[i] = i * params.mu1
        energy[i] = base_energy
        hold[i] = i * params.c_hold_g1
    for j in range(1, m + 1):
        k = n + j
        g1[k] = n * params.mu1
        g2[k] = min(d[j - 1], j) * params.mu2
        energy[k] = (n * params.p1_work + d[j - 1] * params.p2_work
                     + (m - d[j - 1]) * params.p2_sleep) * params.c_energy
        hold[k] = n * params.c_hold_g1 + j * params.c_hold_g2
    return g1, g2, energy, hold


class _Stream:
    """Sequential uniforms from one Philox stream, buffer-size agnostic."""

    def __init__(self, seed: int, replication: int):
        bits = np.random.Philox(np.random.SeedSequence((seed, replication)))
        self._rng = np.random.Generator(bits)
        self.buf = self._rng.random(BUFFER_SIZE)
        self.cursor = 0

    def refill(self) -> None:
        tail = self.buf[self.cursor:]
        self.buf = np.concatenate([tail, self._rng.random(BUFFER_SIZE)])
        self.cursor = 0


def _run_segment(kernel, stream, state, events, time_limit, rates, dwell,
                 acc, counts, trace=None):
    """Run one warmup segment or batch to its event or time limit."""
    k, t = state
    g1, g2, energy, hold, lam, n, top = rates
    remaining = int(events)
    while True:
        done_before = counts[_simkernel.COUNT_EVENTS]
        if trace is None:
            k, t, stream.cursor, status = kernel(
                k, t, stream.buf, stream.cursor, remaining, time_limit,
                lam, n, top, g1, g2, energy, hold, dwell, acc, counts)
        else:
            k, t, stream.cursor, status = _simkernel._kernel_trace(
                k, t, stream.buf, stream.cursor, remaining, time_limit,
                lam, n, top, g1, g2, energy, hold, dwell, acc, counts, trace)
        remaining -= int(counts[_simkernel.COUNT_EVENTS] - done_before)
        if status == DONE:
            return k, t
        assert status == REFILL
        stream.refill()


def simulate(params: ModelParams, d: Policy, cfg: SimConfig,
             trace: bool = False, method: str = "auto") -> SimResult:
    """Simulate the cluster under policy d and estimate eta and pi.

    method "auto" uses the JIT kernel when available, "jit" insists on it,
    and "python" forces the interpreted kernel (required for trace
    capture); all produce bit-identical results. The trace, when
    requested, lists (time, state_before, event, state_after) tuples
    across the whole run including warmup.
    """
    require_valid(params)
    check_policy(d, params.m)
    _validate_config(cfg)
    if method not in ("auto", "jit", "python"):
        raise ValueError(f"unknown method {method!r}")

    kernel = _simkernel.kernel_jit
    if method == "jit":
        if kernel is None:
            raise ConfigError("the compiled kernel is unavailable; "
                              "numba is not installed")
        if trace:
            raise ConfigError("trace capture needs method 'python' or 'auto'")
    elif method == "python" or trace or kernel is None:
        kernel = _simkernel.kernel_python
    trace_log: list | None = [] if trace else None

    size = state_space(params).size
    g1, g2, energy, hold = _rates(params, d)
    rates = (g1, g2, energy, hold, params.lambda_, params.n, size - 1)

    event_mode = cfg.unit == "events"
    warmup = cfg.resolved_warmup()
    reps = cfg.replications
    nbatch = cfg.batch_count

    if event_mode:
        warmup_events = int(warmup)
        post_events = int(cfg.horizon) - warmup_events
        base, extra = divmod(post_events, nbatch)
        batch_events = [base + (1 if b < extra else 0) for b in range(nbatch)]
        if min(batch_events) < 1:
            raise ConfigError(
                f"{post_events} post-warmup events cannot fill "
                f"{nbatch} batches"
            )

    rep_etas = np.empty(reps)
    records = np.empty((reps * nbatch, 4))
    batch_pi = np.empty((reps * nbatch, size))
    total_dwell = np.zeros(size)
    total_acc = np.zeros(2)
    total_counts = np.zeros(5, dtype=np.int64)
    total_time = 0.0

    r_price = params.price
    for rep in range(reps):
        stream = _Stream(cfg.seed, rep)
        state = (0, 0.0)
        scratch_dwell = np.zeros(size)
        scratch_acc = np.zeros(2)
        scratch_counts = np.zeros(5, dtype=np.int64)

        if event_mode:
            if warmup_events:
                state = _run_segment(kernel, stream, state, warmup_events,
                                     np.inf, rates, scratch_dwell,
                                     scratch_acc, scratch_counts, trace_log)
        else:
            if warmup > 0:
                state = _run_segment(kernel, stream, state, _NO_EVENT_LIMIT,
                                     warmup, rates, scratch_dwell,
                                     scratch_acc, scratch_counts, trace_log)

        rep_num = 0.0
        rep_time = 0.0
        for b in range(nbatch):
            dwell = np.zeros(size)
            acc = np.zeros(2)
            counts = np.zeros(5, dtype=np.int64)
            t_start = state[1]
            if event_mode:
                state = _run_segment(kernel, stream, state, batch_events[b],
                                     np.inf, rates, dwell, acc, counts,
                                     trace_log)
            else:
                boundary = warmup + (cfg.horizon - warmup) * (b + 1) / nbatch
                state = _run_segment(kernel, stream, state, _NO_EVENT_LIMIT,
                                     boundary, rates, dwell, acc, counts,
                                     trace_log)
            batch_time = state[1] - t_start
            completions = counts[_simkernel.COUNT_G1] + counts[_simkernel.COUNT_G2]
            numerator = (r_price * completions - acc[0] - acc[1]
                         - params.c_transfer * counts[_simkernel.COUNT_TRANSFER]
                         - params.c_loss * counts[_simkernel.COUNT_LOSS])
            row = rep * nbatch + b
            records[row] = (rep, b, batch_time, numerator / batch_time)
            batch_pi[row] = dwell / dwell.sum()
            total_dwell += dwell
            total_acc += acc
            total_counts += counts
            total_time += batch_time
            rep_num += numerator
            rep_time += batch_time
        rep_etas[rep] = rep_num / rep_time

    # Recompute from the recorded totals so the reported decomposition
    # reproduces eta_hat bit for bit.
    completions_total = int(total_counts[_simkernel.COUNT_G1]
                            + total_counts[_simkernel.COUNT_G2])
    eta_hat = (r_price * completions_total - total_acc[0] - total_acc[1]
               - params.c_transfer * int(total_counts[_simkernel.COUNT_TRANSFER])
               - params.c_loss * int(total_counts[_simkernel.COUNT_LOSS])
               ) / total_time
    if reps > 1:
        samples = rep_etas
    else:
        samples = records[:, 3]
    spread = float(np.std(samples, ddof=1))
    quantile = float(stats.t.ppf(0.975, samples.shape[0] - 1))
    ci_half_width = quantile * spread / np.sqrt(samples.shape[0])

    counts_out = EventCounts(
        completions_g1=int(total_counts[_simkernel.COUNT_G1]),
        completions_g2=int(total_counts[_simkernel.COUNT_G2]),
        transfers=int(total_counts[_simkernel.COUNT_TRANSFER]),
        losses=int(total_counts[_simkernel.COUNT_LOSS]),
        events=int(total_counts[_simkernel.COUNT_EVENTS]),
    )
    return SimResult(
        eta_hat=float(eta_hat),
        ci_half_width=float(ci_half_width),
        pi_hat=total_dwell / total_dwell.sum(),
        counts=counts_out,
        total_time=float(total_time),
        energy_integral=float(total_acc[0]),
        holding_integral=float(total_acc[1]),
        replication_etas=rep_etas,
        batch_records=records,
        batch_pi=batch_pi,
        trace=trace_log,
    )


def empirical_distribution(result: SimResult) -> np.ndarray:
    """Time-weighted state occupancy, normalized to sum to one."""
    if result.total_time <= 0:
        raise ValueError("no post-warmup time was simulated")
    return result.pi_hat.copy()
