"""Continuous-time Markov models of gradual learning under resets.

Exact Gillespie simulation, closed-form stationary and hitting-time
analysis, perfect stationary sampling by time reversal, a brute-force
validation oracle, and a Monte Carlo replication harness.
"""

from .models import (
    COLUMN_ZERO,
    ENTRY_SET,
    ROW_SET,
    ColumnState,
    MatrixEvent,
    MatrixParams,
    MatrixState,
    SingleColumnParams,
    apply_event,
    column_zero,
    compose_closed_form,
    entry_set,
    enumerate_rates,
    row_set,
)
from .analytics import (
    ClosedFormReport,
    collection_time_laplace,
    coupon_done_by_draws,
    coupon_done_by_time,
    coupon_tail_bounds,
    hitting_time_mean_asymptotic,
    hitting_time_mean_exact,
    hitting_time_means_exact,
    hitting_time_variance_exact,
    identify_parameters,
    invariant_pmf,
    steady_allones_count,
    steady_allones_count_reports,
    steady_allones_probability,
    transition_time_prediction,
    zero_count_ratio,
    zero_count_ratio_asymptotic,
)
from .simulate import (
    STOP_COLUMN_REACHES_M,
    STOP_FIRST_FULL_COLUMN,
    STOP_TIME_HORIZON,
    SimulationConfig,
    Trajectory,
    hitting_time_batch,
    simulate_matrix,
    simulate_single_column,
)
from .reversal import (
    sample_invariant,
    sample_invariant_coupled,
    sample_invariant_histogram,
    sample_invariant_pai_off,
    sample_invariant_pai_on,
)
from .oracle import (
    DenseGenerator,
    coupon_enumerate,
    hitting_moments,
    matrix_generator,
    single_column_generator,
    single_column_hitting_moments_exact,
    stationary_solve,
)
from .stats import (
    EstimateWithCI,
    TransitionWindow,
    chi_square_gof,
    detect_transition,
    empirical_distribution,
    empirical_tv,
    estimate_mean,
    occupation_fractions,
)
from .rng import replicate_rng

__version__ = "0.1.0"
