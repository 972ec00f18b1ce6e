"""Gillespie engine: determinism, exact-law checks, cross-module agreement."""

import math

import numpy as np
import pytest

from immunochain import analytics, oracle
from immunochain.models import (
    COLUMN_ZERO,
    ENTRY_SET,
    ROW_SET,
    MatrixParams,
    MatrixState,
    SingleColumnParams,
    apply_event,
)
from immunochain.simulate import (
    STOP_COLUMN_REACHES_M,
    STOP_FIRST_FULL_COLUMN,
    STOP_TIME_HORIZON,
    SimulationConfig,
    Trajectory,
    hitting_time_batch,
    simulate_matrix,
    simulate_single_column,
)
from immunochain.stats import chi_square_gof, empirical_tv, occupation_fractions


def hit_config(seed, r=0, **kw):
    return SimulationConfig(
        master_seed=seed, replicate_index=r, stop_condition=STOP_COLUMN_REACHES_M, **kw
    )


class TestConfigValidation:
    def test_time_horizon_needs_horizon(self):
        with pytest.raises(ValueError):
            SimulationConfig(master_seed=1, stop_condition=STOP_TIME_HORIZON)

    def test_negative_horizon_rejected(self):
        with pytest.raises(ValueError):
            SimulationConfig(master_seed=1, stop_condition=STOP_COLUMN_REACHES_M, horizon=-1.0)

    def test_unknown_stop_rejected(self):
        with pytest.raises(ValueError):
            SimulationConfig(master_seed=1, stop_condition="whenever")

    def test_stop_conditions_are_model_specific(self):
        params = SingleColumnParams(M=2, alpha=1.0, p=0.5)
        cfg = SimulationConfig(master_seed=1, stop_condition=STOP_FIRST_FULL_COLUMN)
        with pytest.raises(ValueError):
            simulate_single_column(params, cfg)
        mparams = MatrixParams(M=2, N=2, p=0.5)
        with pytest.raises(ValueError):
            simulate_matrix(mparams, hit_config(1))


class TestSingleColumn:
    def test_absorbed_start_is_instant(self):
        params = SingleColumnParams(M=3, alpha=1.0, p=0.5)
        traj = simulate_single_column(params, hit_config(42), start=3)
        assert traj.tau == 0.0
        assert traj.n_events == 0

    def test_deterministic_given_seed_and_replicate(self):
        params = SingleColumnParams(M=4, alpha=1.2, p=0.4)
        a = simulate_single_column(params, hit_config(99, 3, record_series=True))
        b = simulate_single_column(params, hit_config(99, 3, record_series=True))
        assert a.tau == b.tau
        assert np.array_equal(a.series_times, b.series_times)
        c = simulate_single_column(params, hit_config(99, 4))
        assert c.tau != a.tau

    def test_series_times_strictly_increase(self):
        params = SingleColumnParams(M=4, alpha=1.0, p=0.3)
        traj = simulate_single_column(params, hit_config(7, record_series=True))
        assert (np.diff(traj.series_times) > 0).all()
        assert traj.series_values[-1] == 4
        assert traj.tau == traj.series_times[-1]

    def test_horizon_caps_run(self):
        params = SingleColumnParams(M=50, alpha=1.0, p=0.9)
        cfg = SimulationConfig(
            master_seed=5, stop_condition=STOP_COLUMN_REACHES_M, horizon=10.0
        )
        traj = simulate_single_column(params, cfg)
        assert traj.tau is None
        assert traj.end_time == 10.0

    def test_mean_hitting_time_m1(self):
        # tau ~ Exp(1/2): mean 2.0, checked within 3 sigma of the mean.
        params = SingleColumnParams(M=1, alpha=1.0, p=0.5)
        taus = hitting_time_batch(params, 100_000, master_seed=2024)
        assert 1.94 <= taus.mean() <= 2.06

    def test_mean_hitting_time_m2(self):
        params = SingleColumnParams(M=2, alpha=1.0, p=0.5)
        taus = hitting_time_batch(params, 40_000, master_seed=77)
        exact = 10.0
        se = taus.std(ddof=1) / math.sqrt(taus.size)
        assert abs(taus.mean() - exact) < 3 * se

    def test_embedded_chain_frequencies(self):
        # Conditional on leaving state k, the uniformized step law gives
        # P(up | move) = q'(1-k/M) / (q'(1-k/M) + p'); empirical
        # frequencies must match within 4 sigma per state.
        params = SingleColumnParams(M=4, alpha=1.3, p=0.35)
        cfg = SimulationConfig(
            master_seed=31, stop_condition=STOP_TIME_HORIZON, horizon=40_000.0,
            record_series=True,
        )
        traj = simulate_single_column(params, cfg)
        states = traj.series_values
        lam = params.uniformization_rate
        p_d = params.p / lam
        q_d = params.alpha * params.q / lam
        for k in range(1, params.M):
            from_k = states[:-1] == k
            n_k = int(from_k.sum())
            ups = int((states[1:][from_k] == k + 1).sum())
            expected = (q_d * (1 - k / params.M)) / (q_d * (1 - k / params.M) + p_d)
            se = math.sqrt(expected * (1 - expected) / n_k)
            assert abs(ups / n_k - expected) < 4 * se, f"state {k}"

    def test_occupation_fractions_match_invariant_law(self):
        for M in (1, 4, 8):
            params = SingleColumnParams(M=M, alpha=1.0, p=0.3)
            horizon = 1_000_000.0 / params.uniformization_rate
            cfg = SimulationConfig(
                master_seed=M, stop_condition=STOP_TIME_HORIZON, horizon=horizon,
                record_series=True,
            )
            traj = simulate_single_column(params, cfg)
            occ = occupation_fractions(traj, M + 1)
            tv = empirical_tv(occ, analytics.invariant_pmf(params))
            assert tv < 0.02, f"M={M}: tv={tv}"

    def test_occupation_chi_square_at_99_level(self):
        # States sampled at widely spaced times are near-independent; the
        # pooled chi-square must not reject at the 99% level.
        params = SingleColumnParams(M=8, alpha=1.0, p=0.3)
        spacing, n_samples = 25.0, 4000
        cfg = SimulationConfig(
            master_seed=88, stop_condition=STOP_TIME_HORIZON,
            horizon=spacing * (n_samples + 1), record_series=True,
        )
        traj = simulate_single_column(params, cfg)
        sample_times = spacing * np.arange(1, n_samples + 1)
        idx = np.searchsorted(traj.series_times, sample_times, side="right") - 1
        sampled = traj.series_values[idx]
        counts = np.bincount(sampled, minlength=9)
        _, _, p_value = chi_square_gof(counts, analytics.invariant_pmf(params))
        assert p_value > 0.01


class TestBatch:
    def test_batch_of_one_equals_single_run(self):
        params = SingleColumnParams(M=3, alpha=1.0, p=0.5)
        taus = hitting_time_batch(params, 1, master_seed=11)
        traj = simulate_single_column(params, hit_config(11, 0))
        assert taus[0] == traj.tau

    def test_batch_reproducible(self):
        params = SingleColumnParams(M=3, alpha=1.0, p=0.5)
        a = hitting_time_batch(params, 50, master_seed=5)
        b = hitting_time_batch(params, 50, master_seed=5)
        assert np.array_equal(a, b)

    def test_batch_independent_of_worker_count(self):
        params = SingleColumnParams(M=3, alpha=1.0, p=0.5)
        seq = hitting_time_batch(params, 40, master_seed=6, workers=1)
        par = hitting_time_batch(params, 40, master_seed=6, workers=4)
        assert np.array_equal(seq, par)

    def test_matrix_batch(self):
        params = MatrixParams(M=2, N=2, p=0.4)
        taus = hitting_time_batch(params, 30, master_seed=8)
        assert (taus > 0).all()

    def test_rejects_empty_batch(self):
        with pytest.raises(ValueError):
            hitting_time_batch(SingleColumnParams(M=2, alpha=1.0, p=0.5), 0, master_seed=1)


class TestMatrix:
    def test_lambda_zero_never_sets_entries(self):
        params = MatrixParams(M=3, N=2, p=0.4, lambda_m=0.0)
        cfg = SimulationConfig(
            master_seed=13, stop_condition=STOP_TIME_HORIZON, horizon=200.0,
            record_events=True,
        )
        traj = simulate_matrix(params, cfg)
        assert traj.n_events > 50
        assert all(ev.kind != ENTRY_SET for ev in traj.events)

    def test_entry_events_present_with_lambda(self):
        params = MatrixParams(M=3, N=2, p=0.4, lambda_m=0.5)
        cfg = SimulationConfig(
            master_seed=13, stop_condition=STOP_TIME_HORIZON, horizon=100.0,
            record_events=True,
        )
        traj = simulate_matrix(params, cfg)
        assert any(ev.kind == ENTRY_SET for ev in traj.events)

    def test_two_state_occupancy(self):
        # M = N = 1, p = 1/2: symmetric two-state chain, half time in [1].
        params = MatrixParams(M=1, N=1, p=0.5)
        cfg = SimulationConfig(
            master_seed=3, stop_condition=STOP_TIME_HORIZON, horizon=200_000.0,
            record_series=True,
        )
        traj = simulate_matrix(params, cfg)
        occ = occupation_fractions(traj, 2)
        assert occ[1] == pytest.approx(0.5, abs=0.02)

    def test_event_replay_reproduces_final_state(self):
        # The fast in-place engine must agree with the pure event semantics.
        for seed in (1, 2, 3):
            params = MatrixParams(M=3, N=3, p=0.3, lambda_m=0.2)
            cfg = SimulationConfig(
                master_seed=seed, stop_condition=STOP_TIME_HORIZON, horizon=60.0,
                record_events=True,
            )
            traj = simulate_matrix(params, cfg)
            state = MatrixState.zeros(3, 3)
            for ev in traj.events:
                state = apply_event(state, ev)
            assert state == traj.final_matrix
            assert traj.final_matrix.counts_consistent()

    def test_event_times_strictly_increase(self):
        params = MatrixParams(M=2, N=2, p=0.5, lambda_m=0.1)
        cfg = SimulationConfig(
            master_seed=21, stop_condition=STOP_TIME_HORIZON, horizon=100.0,
            record_events=True,
        )
        traj = simulate_matrix(params, cfg)
        times = [ev.time for ev in traj.events]
        assert all(b > a for a, b in zip(times, times[1:]))

    def test_full_column_needs_fresh_rows_after_reset(self):
        # lambda = 0, empty start: at tau the full column must have every
        # row set after that column's last reset.
        params = MatrixParams(M=3, N=2, p=0.45, lambda_m=0.0)
        for seed in range(6):
            cfg = SimulationConfig(
                master_seed=seed, stop_condition=STOP_FIRST_FULL_COLUMN,
                record_events=True,
            )
            traj = simulate_matrix(params, cfg)
            assert traj.tau is not None
            full_cols = [
                j for j in range(2)
                if traj.final_matrix.column_counts[j] == params.M
            ]
            assert full_cols
            for j in full_cols:
                last_reset = max(
                    (ev.time for ev in traj.events if ev.kind == COLUMN_ZERO and ev.col == j),
                    default=0.0,
                )
                for i in range(params.M):
                    row_times = [
                        ev.time for ev in traj.events
                        if ev.kind == ROW_SET and ev.row == i and ev.time > last_reset
                    ]
                    assert row_times, f"row {i} never set after reset of column {j}"

    def test_start_with_full_column_tau_zero(self):
        params = MatrixParams(M=2, N=2, p=0.4)
        start = MatrixState.from_entries([[1, 0], [1, 0]])
        cfg = SimulationConfig(master_seed=1, stop_condition=STOP_FIRST_FULL_COLUMN)
        traj = simulate_matrix(params, cfg, start=start)
        assert traj.tau == 0.0

    def test_empirical_allones_probability_matches_analytics(self):
        # Long-run column-full frequency against the Gamma-ratio law,
        # within 3 standard errors over independent endpoint replicates.
        params = MatrixParams(M=3, N=2, p=0.3, lambda_m=0.1)
        exact = analytics.steady_allones_probability(params)
        horizon = 80.0
        hits = []
        for r in range(1500):
            cfg = SimulationConfig(
                master_seed=909, replicate_index=r,
                stop_condition=STOP_TIME_HORIZON, horizon=horizon,
            )
            traj = simulate_matrix(params, cfg)
            hits.append(traj.end_value / params.N)
        hits = np.array(hits)
        se = hits.std(ddof=1) / math.sqrt(hits.size)
        assert abs(hits.mean() - exact) < 3 * se

    def test_trajectory_value_at(self):
        traj = Trajectory(
            tau=None, end_time=10.0, end_value=2, n_events=2,
            series_times=np.array([0.0, 4.0]), series_values=np.array([0, 2]),
        )
        assert traj.value_at(3.9) == 0
        assert traj.value_at(4.0) == 2
        with pytest.raises(ValueError):
            traj.value_at(-1.0)
