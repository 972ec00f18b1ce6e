"""Exact event-driven simulation of both chains.

True Gillespie sampling: the holding time in a state is exponential with
the total outgoing rate and the next event is chosen proportionally to
the individual rates. For the matrix chain the total rate
``p + q + N*lambda_m`` is constant over states (event classes carry
equal within-class rates), so each step costs O(1) draws: one for the
holding time, one for the event class, one for the index.

Randomness is fully reproducible: replicate ``r`` of a batch draws from
the stream keyed by ``(master_seed, r)``, so batch output is independent
of execution order and worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .models import (
    COLUMN_ZERO,
    ENTRY_SET,
    ROW_SET,
    MatrixEvent,
    MatrixParams,
    MatrixState,
    SingleColumnParams,
)
from .rng import replicate_rng

__all__ = [
    "STOP_COLUMN_REACHES_M",
    "STOP_FIRST_FULL_COLUMN",
    "STOP_TIME_HORIZON",
    "SimulationConfig",
    "Trajectory",
    "simulate_single_column",
    "simulate_matrix",
    "hitting_time_batch",
]

STOP_COLUMN_REACHES_M = "column_reaches_m"
STOP_FIRST_FULL_COLUMN = "first_full_column"
STOP_TIME_HORIZON = "time_horizon"

_BLOCK = 8192


@dataclass(frozen=True)
class SimulationConfig:
    """What to simulate, when to stop, and what to record.

    ``horizon`` is required for the time-horizon stop condition and acts
    as an optional cap otherwise (a run that hits the cap before its
    stop predicate reports ``tau=None``). Series recording stores the
    observable after every change; event recording stores full
    timestamped events (matrix chain only) and is meant for small runs.
    """

    master_seed: int
    replicate_index: int = 0
    horizon: float | None = None
    stop_condition: str = STOP_TIME_HORIZON
    record_series: bool = False
    record_events: bool = False

    def __post_init__(self):
        if self.stop_condition not in (
            STOP_COLUMN_REACHES_M,
            STOP_FIRST_FULL_COLUMN,
            STOP_TIME_HORIZON,
        ):
            raise ValueError(f"unknown stop condition {self.stop_condition!r}")
        if self.stop_condition == STOP_TIME_HORIZON:
            if self.horizon is None or not self.horizon > 0:
                raise ValueError("time-horizon stop requires a positive horizon")
        if self.horizon is not None and not self.horizon > 0:
            raise ValueError("horizon must be positive when given")


@dataclass
class Trajectory:
    """Observables of one simulation run.

    ``tau`` is the first time the stop predicate's target was reached
    (absorption at M, or a first all-ones column), ``None`` if it never
    happened within the run. The series, when recorded, is piecewise
    constant: ``series_values[i]`` holds on
    ``[series_times[i], series_times[i+1])``.
    """

    tau: float | None
    end_time: float
    end_value: int
    n_events: int
    series_times: np.ndarray | None = None
    series_values: np.ndarray | None = None
    events: list[MatrixEvent] | None = None
    final_matrix: MatrixState | None = None

    def value_at(self, t: float) -> int:
        if self.series_times is None:
            raise ValueError("trajectory was run without series recording")
        idx = int(np.searchsorted(self.series_times, t, side="right")) - 1
        if idx < 0:
            raise ValueError(f"time {t} precedes the recorded series")
        return int(self.series_values[idx])


def simulate_single_column(
    params: SingleColumnParams, config: SimulationConfig, start: int = 0
) -> Trajectory:
    """Exact trajectory of the single-column chain.

    Stops at the first hit of k = M under ``column_reaches_m`` (possibly
    capped by ``horizon``), or runs to the horizon under ``time_horizon``
    with the chain continuing through M (resets keep occurring).
    """
    if config.stop_condition == STOP_FIRST_FULL_COLUMN:
        raise ValueError("first_full_column applies to the matrix chain; use column_reaches_m")
    M = params.M
    if not 0 <= start <= M:
        raise ValueError(f"start must lie in [0, {M}], got {start!r}")

    stop_on_hit = config.stop_condition == STOP_COLUMN_REACHES_M
    horizon = config.horizon
    rng = replicate_rng(config.master_seed, config.replicate_index)

    up_rate = [params.alpha * params.q * (1.0 - k / M) for k in range(M + 1)]
    inv_total = [0.0] * (M + 1)
    up_frac = [0.0] * (M + 1)
    for k in range(M + 1):
        total = up_rate[k] + (params.p if k > 0 else 0.0)
        inv_total[k] = 1.0 / total
        if 0 < k < M:
            up_frac[k] = up_rate[k] * inv_total[k]

    times = [0.0] if config.record_series else None
    values = [start] if config.record_series else None

    k = start
    t = 0.0
    tau = 0.0 if k == M else None
    n_events = 0
    log1p = math.log1p

    if not (stop_on_hit and tau is not None):
        buf = rng.random(_BLOCK)
        pos = 0
        while True:
            if pos + 2 >= _BLOCK:
                buf = rng.random(_BLOCK)
                pos = 0
            dt = -log1p(-buf[pos]) * inv_total[k]
            if horizon is not None and t + dt > horizon:
                t = horizon
                break
            t += dt
            if k == 0:
                k = 1
                pos += 1
            elif k == M:
                k = 0
                pos += 1
            else:
                k = k + 1 if buf[pos + 1] < up_frac[k] else 0
                pos += 2
            n_events += 1
            if times is not None:
                times.append(t)
                values.append(k)
            if k == M and tau is None:
                tau = t
                if stop_on_hit:
                    break

    return Trajectory(
        tau=tau,
        end_time=t,
        end_value=k,
        n_events=n_events,
        series_times=np.array(times) if times is not None else None,
        series_values=np.array(values, dtype=np.int64) if values is not None else None,
    )


def simulate_matrix(
    params: MatrixParams, config: SimulationConfig, start: MatrixState | None = None
) -> Trajectory:
    """Exact trajectory of the matrix chain.

    Tracks the all-ones column count; ``tau`` is the first time it
    becomes positive. The recorded series holds the count at each change.
    With ``record_events`` the full event list and final matrix are kept
    (intended for small cross-check runs, not production batches).
    """
    if config.stop_condition == STOP_COLUMN_REACHES_M:
        raise ValueError("column_reaches_m applies to the single-column chain; use first_full_column")
    M, N = params.M, params.N
    if start is None:
        start = MatrixState.zeros(M, N)
    if start.M != M or start.N != N:
        raise ValueError("start state shape does not match parameters")

    stop_on_hit = config.stop_condition == STOP_FIRST_FULL_COLUMN
    horizon = config.horizon
    rng = replicate_rng(config.master_seed, config.replicate_index)

    total = params.total_rate
    inv_total = 1.0 / total
    thr_row = params.q * inv_total
    thr_col = (params.q + params.p) * inv_total
    MN = M * N

    A = start.entries.copy()
    cc = start.column_counts.copy()
    full = int(np.count_nonzero(cc == M))

    times = [0.0] if config.record_series else None
    values = [full] if config.record_series else None
    events: list[MatrixEvent] | None = [] if config.record_events else None

    t = 0.0
    tau = 0.0 if full > 0 else None
    n_events = 0
    log1p = math.log1p

    if not (stop_on_hit and tau is not None):
        buf = rng.random(_BLOCK)
        pos = 0
        while True:
            if pos + 3 >= _BLOCK:
                buf = rng.random(_BLOCK)
                pos = 0
            dt = -log1p(-buf[pos]) * inv_total
            u_class = buf[pos + 1]
            u_index = buf[pos + 2]
            pos += 3
            if horizon is not None and t + dt > horizon:
                t = horizon
                break
            t += dt
            n_events += 1
            if u_class < thr_row:
                j = int(u_index * M)
                row = A[j]
                newly = row == 0
                if newly.any():
                    row[newly] = 1
                    cc[newly] += 1
                    full = int(np.count_nonzero(cc == M))
                if events is not None:
                    events.append(MatrixEvent(ROW_SET, row=j, time=t))
            elif u_class < thr_col:
                i = int(u_index * N)
                if cc[i]:
                    if cc[i] == M:
                        full -= 1
                    A[:, i] = 0
                    cc[i] = 0
                if events is not None:
                    events.append(MatrixEvent(COLUMN_ZERO, col=i, time=t))
            else:
                e = int(u_index * MN)
                i, j = divmod(e, N)
                if A[i, j] == 0:
                    A[i, j] = 1
                    cc[j] += 1
                    if cc[j] == M:
                        full += 1
                if events is not None:
                    events.append(MatrixEvent(ENTRY_SET, row=i, col=j, time=t))
            if times is not None and values[-1] != full:
                times.append(t)
                values.append(full)
            if full > 0 and tau is None:
                tau = t
                if stop_on_hit:
                    break

    return Trajectory(
        tau=tau,
        end_time=t,
        end_value=full,
        n_events=n_events,
        series_times=np.array(times) if times is not None else None,
        series_values=np.array(values, dtype=np.int64) if values is not None else None,
        events=events,
        final_matrix=MatrixState.from_entries(A) if config.record_events else None,
    )


def _one_tau(params, master_seed: int, replicate: int, start) -> float:
    if isinstance(params, SingleColumnParams):
        config = SimulationConfig(
            master_seed=master_seed,
            replicate_index=replicate,
            stop_condition=STOP_COLUMN_REACHES_M,
        )
        traj = simulate_single_column(params, config, start=0 if start is None else start)
    else:
        config = SimulationConfig(
            master_seed=master_seed,
            replicate_index=replicate,
            stop_condition=STOP_FIRST_FULL_COLUMN,
        )
        traj = simulate_matrix(params, config, start=start)
    return math.nan if traj.tau is None else traj.tau


def hitting_time_batch(
    params: SingleColumnParams | MatrixParams,
    n_replicates: int,
    master_seed: int,
    start=None,
    workers: int = 1,
) -> np.ndarray:
    """Independent first-hit times, one per replicate stream.

    Replicate ``r`` draws from the stream keyed by ``(master_seed, r)``;
    the returned array is ordered by replicate index, so the result is
    byte-identical for any ``workers`` value.
    """
    if n_replicates < 1:
        raise ValueError("need at least one replicate")
    taus = np.empty(n_replicates)
    if workers <= 1:
        for r in range(n_replicates):
            taus[r] = _one_tau(params, master_seed, r, start)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                r: pool.submit(_one_tau, params, master_seed, r, start)
                for r in range(n_replicates)
            }
            for r, fut in futures.items():
                taus[r] = fut.result()
    return taus
