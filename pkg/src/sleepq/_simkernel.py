"""Inner event loop of the simulator, written to be numba-compilable.

The same function body runs pure-Python (fallback and trace capture) and
JIT-compiled; it uses only scalars, math.log, and preallocated arrays so
both paths execute the identical IEEE operation sequence.

Uniform consumption contract: exactly two uniforms per completed event
(one for the dwell, one for the event selection), and one uniform for a
dwell clipped by a time limit. The kernel never wraps around a buffer: if
fewer than two uniforms remain it returns REFILL and the caller prepends
the unused tail to the next block, so the consumed uniform sequence is
independent of the buffer size.
"""

from __future__ import annotations

import math

#: Kernel return codes.
DONE = 0
REFILL = 1

#: Slots of the int64 counter array.
COUNT_G1 = 0
COUNT_G2 = 1
COUNT_TRANSFER = 2
COUNT_LOSS = 3
COUNT_EVENTS = 4


def _kernel(k, t, buf, cursor, remaining, time_limit, lam, n, top,
            g1_rate, g2_rate, energy_rate, hold_rate, dwell, acc, counts):
    """Advance the chain until the event budget or time limit is hit.

    k: current state index; t: current absolute time; buf/cursor: uniform
    buffer and read position; remaining: events still allowed (int64, may
    be huge in time mode); time_limit: absolute stop time (inf in event
    mode). Rates are per-state arrays; top == n + m is the loss state.
    Accumulates dwell times, acc[0] energy and acc[1] holding integrals,
    and the counter slots. Returns (k, t, cursor, status).
    """
    while remaining > 0 and t < time_limit:
        if cursor + 2 > buf.shape[0]:
            return k, t, cursor, REFILL
        total = lam + g1_rate[k] + g2_rate[k]
        dt = -math.log(1.0 - buf[cursor]) / total
        if t + dt > time_limit:
            span = time_limit - t
            dwell[k] += span
            acc[0] += energy_rate[k] * span
            acc[1] += hold_rate[k] * span
            cursor += 1
            return k, time_limit, cursor, DONE
        dwell[k] += dt
        acc[0] += energy_rate[k] * dt
        acc[1] += hold_rate[k] * dt
        t += dt
        x = buf[cursor + 1] * total
        cursor += 2
        if x < lam:
            if k < top:
                k += 1
            else:
                counts[COUNT_LOSS] += 1
        elif x < lam + g1_rate[k]:
            counts[COUNT_G1] += 1
            if k > n:
                counts[COUNT_TRANSFER] += 1
            k -= 1
        else:
            counts[COUNT_G2] += 1
            k -= 1
        counts[COUNT_EVENTS] += 1
        remaining -= 1
    return k, t, cursor, DONE


def _kernel_trace(k, t, buf, cursor, remaining, time_limit, lam, n, top,
                  g1_rate, g2_rate, energy_rate, hold_rate, dwell, acc,
                  counts, trace):
    """_kernel with an event log appended to trace.

    Each record is (time, state_before, event, state_after) with event one
    of 'arrival', 'loss', 'g1', 'transfer', 'g2'. Arithmetic matches
    _kernel operation for operation.
    """
    while remaining > 0 and t < time_limit:
        if cursor + 2 > buf.shape[0]:
            return k, t, cursor, REFILL
        total = lam + g1_rate[k] + g2_rate[k]
        dt = -math.log(1.0 - buf[cursor]) / total
        if t + dt > time_limit:
            span = time_limit - t
            dwell[k] += span
            acc[0] += energy_rate[k] * span
            acc[1] += hold_rate[k] * span
            cursor += 1
            return k, time_limit, cursor, DONE
        dwell[k] += dt
        acc[0] += energy_rate[k] * dt
        acc[1] += hold_rate[k] * dt
        t += dt
        x = buf[cursor + 1] * total
        cursor += 2
        before = k
        if x < lam:
            if k < top:
                k += 1
                trace.append((t, before, "arrival", k))
            else:
                counts[COUNT_LOSS] += 1
                trace.append((t, before, "loss", k))
        elif x < lam + g1_rate[k]:
            counts[COUNT_G1] += 1
            if k > n:
                counts[COUNT_TRANSFER] += 1
                trace.append((t, before, "transfer", k - 1))
            else:
                trace.append((t, before, "g1", k - 1))
            k -= 1
        else:
            counts[COUNT_G2] += 1
            trace.append((t, before, "g2", k - 1))
            k -= 1
        counts[COUNT_EVENTS] += 1
        remaining -= 1
    return k, t, cursor, DONE


try:
    import numba

    # No fastmath: the jitted path must be IEEE-identical to the fallback.
    kernel_jit = numba.njit(cache=True)(_kernel)
except ImportError:  # pragma: no cover - exercised only without numba
    kernel_jit = None

kernel_python = _kernel
