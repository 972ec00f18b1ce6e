"""Closed-form and asymptotic quantities for both chains.

Covers the invariant law of the single-column chain, its hitting-time
moments (exact via the uniformized-chain recursion, asymptotic via the
leading-order power law), the zero-count ratio, coupon-collector
formulas, the steady-state all-ones column statistics of the matrix
chain, the transition-time prediction, and the parameter mapping from
per-step probabilities to continuous rates.

Numerics policy: every Gamma ratio is evaluated as a difference of
log-Gamma values and exponentiated, because the raw Gamma factors
overflow double precision already around argument 170. Where a formula
subtracts 1 from a Gamma ratio, ``expm1`` keeps precision; small
instances use the finite product directly so hand-checkable anchors come
out exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .models import MatrixParams, SingleColumnParams

__all__ = [
    "ClosedFormReport",
    "invariant_pmf",
    "zero_count_ratio",
    "zero_count_ratio_asymptotic",
    "hitting_time_mean_exact",
    "hitting_time_means_exact",
    "hitting_time_mean_asymptotic",
    "hitting_time_variance_exact",
    "coupon_done_by_draws",
    "coupon_done_by_time",
    "coupon_tail_bounds",
    "collection_time_laplace",
    "steady_allones_probability",
    "steady_allones_count",
    "steady_allones_count_reports",
    "transition_time_prediction",
    "transition_time_report",
    "identify_parameters",
]

EXACT = "exact"
ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class ClosedFormReport:
    """A numeric prediction tagged with how it was obtained.

    ``method`` is ``"exact"`` or ``"asymptotic"``; ``formula_id`` names
    the specific formula so emitted values stay traceable.
    """

    value: float
    method: str
    formula_id: str

    def __post_init__(self):
        if self.method not in (EXACT, ASYMPTOTIC):
            raise ValueError(f"method must be 'exact' or 'asymptotic', got {self.method!r}")
        if not math.isfinite(self.value):
            raise ValueError(f"report value must be finite, got {self.value!r}")


def invariant_pmf(params: SingleColumnParams) -> np.ndarray:
    """Stationary law of the single-column chain on {0, ..., M}.

    With beta = p*M/(alpha*q),

        pi_k = [Gamma(M+1)/Gamma(M+1-k)] * [Gamma(beta+M-k)/Gamma(beta+M)]
               * p/(p + alpha*q),

    which solves the balance equations exactly and already sums to one;
    a renormalization guard absorbs the accumulated float error.
    """
    M = params.M
    beta = params.a
    k = np.arange(M + 1)
    log_pi = (
        gammaln(M + 1)
        - gammaln(M + 1 - k)
        + gammaln(beta + M - k)
        - gammaln(beta + M)
        + math.log(params.p / params.uniformization_rate)
    )
    pi = np.exp(log_pi)
    total = pi.sum()
    if abs(total - 1.0) > 1e-8:
        raise ArithmeticError(f"invariant pmf sums to {total!r}; log-space evaluation broke down")
    return pi / total


def zero_count_ratio(params: SingleColumnParams, k: int) -> float:
    """Stationary odds of k missing attributes relative to none missing.

    Equals pi_{M-k}/pi_M = Gamma(beta+k) / (Gamma(k+1) * Gamma(beta)).
    """
    if not 0 <= k <= params.M:
        raise ValueError(f"k must lie in [0, {params.M}], got {k!r}")
    beta = params.a
    return math.exp(gammaln(beta + k) - gammaln(k + 1) - gammaln(beta))


def zero_count_ratio_asymptotic(params: SingleColumnParams, k: int) -> float:
    """Leading-order power law k^(a-1)/Gamma(a) of the zero-count ratio."""
    if k < 1:
        raise ValueError("asymptotic form needs k >= 1")
    a = params.a
    return math.exp((a - 1.0) * math.log(k) - gammaln(a))


def _hitting_steps(params: SingleColumnParams) -> np.ndarray:
    """Expected jumps-to-absorption of the uniformized chain, all starts.

    Uniformizing at rate p + alpha*q gives step probabilities
    p' = p/(p+alpha*q) for a reset and q' = alpha*q/(p+alpha*q) for an
    update attempt (which self-loops with probability k/M). The expected
    step count from 0 telescopes to

        1 + p'*f(0) = prod_{k=1..M} (1 + a/k)
                    = Gamma(M+1+a) / (Gamma(a+1) * Gamma(M+1)),

    and a backward sweep of the one-step recursion fills in the other
    starting states. Everything is a positive combination of positive
    terms, so the sweep is numerically stable.
    """
    M = params.M
    a = params.a
    lam = params.uniformization_rate
    p_d = params.p / lam
    q_d = params.alpha * params.q / lam

    prod = 1.0
    for k in range(1, M + 1):
        prod *= 1.0 + a / k
        if math.isinf(prod):
            break
    if math.isinf(prod):
        ratio_minus_1 = math.expm1(gammaln(M + 1 + a) - gammaln(a + 1) - gammaln(M + 1))
    else:
        ratio_minus_1 = prod - 1.0
    f = np.zeros(M + 1)
    f[0] = ratio_minus_1 / p_d
    for i in range(M - 1, 0, -1):
        w = q_d * (1.0 - i / M)
        f[i] = (1.0 + p_d * f[0] + w * f[i + 1]) / (p_d + w)
    return f


def hitting_time_means_exact(params: SingleColumnParams) -> np.ndarray:
    """Expected continuous time to reach M from every start, as a vector."""
    return _hitting_steps(params) / params.uniformization_rate


def hitting_time_mean_exact(params: SingleColumnParams, start: int = 0) -> float:
    """Expected continuous time to reach state M from ``start``.

    Computed through the uniformized jump chain (closed product form for
    the start-at-0 value, backward recursion for the rest) and converted
    to time by the uniformization rate. Agrees with the dense-solve
    oracle to 1e-9 relative on every tested instance.
    """
    if not 0 <= start <= params.M:
        raise ValueError(f"start must lie in [0, {params.M}], got {start!r}")
    if start == params.M:
        return 0.0
    return float(_hitting_steps(params)[start]) / params.uniformization_rate


def hitting_time_mean_asymptotic(params: SingleColumnParams) -> float:
    """Leading-order mean hitting time M^(a+1) / (Gamma(a+1) * a).

    Valid as M grows with a = p*M/(alpha*q) held fixed. The constant is
    exact for alpha = 1; for alpha != 1 the leading order differs by a
    factor alpha and the exact method is authoritative.
    """
    a = params.a
    return math.exp((a + 1.0) * math.log(params.M) - gammaln(a + 1.0) - math.log(a))


def hitting_time_variance_exact(params: SingleColumnParams, start: int = 0) -> float:
    """Variance of the continuous hitting time of M from ``start``.

    Solves the second-moment recursion of the uniformized chain with the
    ansatz g(i) = u_i + (1 - c_i) g(0), where the complement c_i obeys a
    pure product recursion (no cancellation), then converts moments to
    continuous time: E[T^2] = (g + f) / rate^2.
    """
    if not 0 <= start <= params.M:
        raise ValueError(f"start must lie in [0, {params.M}], got {start!r}")
    if start == params.M:
        return 0.0
    M = params.M
    lam = params.uniformization_rate
    p_d = params.p / lam
    q_d = params.alpha * params.q / lam
    f = _hitting_steps(params)

    u = np.zeros(M + 1)
    c = np.ones(M + 1)
    for i in range(M - 1, -1, -1):
        w = q_d * (1.0 - i / M)
        denom = p_d + w
        u[i] = (2.0 * f[i] - 1.0 + w * u[i + 1]) / denom
        c[i] = w * c[i + 1] / denom
    g0 = u[0] / c[0]
    g = u[start] + (1.0 - c[start]) * g0

    mean = f[start] / lam
    second = (g + f[start]) / lam**2
    return second - mean * mean


def coupon_done_by_draws(N: int, k: int) -> float:
    """Probability that k uniform draws from N coupons collect all N.

    Inclusion-exclusion: sum_{i=1..N} (-1)^(N-i) C(N,i) (i/N)^k for
    k >= N; zero for k < N (pigeonhole, enforced directly rather than
    trusting the alternating sum's roundoff). Alternating cancellation
    limits this to moderate N; the exact-rational oracle covers the rest.
    """
    if N < 1 or k < 0:
        raise ValueError("need N >= 1 and k >= 0")
    if k < N:
        return 0.0
    total = 0.0
    for i in range(1, N + 1):
        term = math.comb(N, i) * (i / N) ** k
        total += term if (N - i) % 2 == 0 else -term
    return min(1.0, max(0.0, total))


def coupon_done_by_time(N: int, t: float, rate: float) -> float:
    """Probability all N coupons are collected by time t.

    Draws arrive as a Poisson stream of total ``rate`` split uniformly,
    so coupon i is collected by t independently with probability
    1 - exp(-rate*t/N), giving (1 - exp(-rate*t/N))^N by thinning.
    """
    if N < 1:
        raise ValueError("need N >= 1")
    if t < 0:
        raise ValueError("time must be nonnegative")
    if rate <= 0:
        raise ValueError("rate must be positive")
    per_coupon = -math.expm1(-rate * t / N)
    return per_coupon**N


def coupon_tail_bounds(n: int, c: float) -> tuple[float, float]:
    """Tail bounds for the collection time sigma of n coupons.

    Returns ``(exp(-3c^2/pi^2), exp(-c))`` bounding
    P(sigma < n log n - c n) and P(sigma > n log n + c n) respectively,
    from the exponential Chebyshev inequality. Meaningful for c >= 1.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if c <= 0:
        raise ValueError("c must be positive")
    return math.exp(-3.0 * c * c / math.pi**2), math.exp(-c)


def collection_time_laplace(M: int, q: float, alpha: float) -> float:
    """Laplace transform E[exp(-alpha*T)] of the coupon collection time.

    T is the time to collect M coupons drawn by an exponential clock of
    total rate q, so T is a sum of independent Exp(q*(1 - i/M)) stages

        E[exp(-alpha*T)] = prod_i p_i/(p_i + alpha)
                         = Gamma(M+1) Gamma(1 + M*alpha/q) / Gamma(M+1+M*alpha/q).
    """
    if M < 1:
        raise ValueError("need M >= 1")
    if q <= 0:
        raise ValueError("q must be positive")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    c = M * alpha / q
    return math.exp(gammaln(M + 1) + gammaln(1 + c) - gammaln(M + 1 + c))


def steady_allones_probability(params: MatrixParams) -> float:
    """Stationary probability that a fixed column is entirely ones.

    Each attribute of the column fills at rate q_tilde/M (row events or
    entry events) while the column resets at rate p/N; racing the fill
    against the reset clock gives the collection-time Laplace transform
    at alpha = p/N with per-stage rates q_tilde*(1 - i/M):

        Gamma(M+1) Gamma(1+c) / Gamma(M+1+c),   c = M*p/(N*q_tilde).
    """
    c = params.M * params.p / (params.N * params.q_tilde)
    return math.exp(gammaln(params.M + 1) + gammaln(1 + c) - gammaln(params.M + 1 + c))


def steady_allones_count(params: MatrixParams, method: str = EXACT) -> float:
    """Expected number of all-ones columns in the stationary law.

    ``exact`` is N times the per-column Gamma ratio. ``asymptotic`` is
    the Stirling limit N * Gamma(1 + b_tilde) / M^b_tilde, which the
    exact value approaches as M, N grow with b_tilde fixed.
    """
    if method == EXACT:
        return params.N * steady_allones_probability(params)
    if method == ASYMPTOTIC:
        bt = params.b_tilde
        return params.N * math.exp(gammaln(1 + bt) - bt * math.log(params.M))
    raise ValueError(f"method must be 'exact' or 'asymptotic', got {method!r}")


def _steady_allones_count_asymptotic_rate_scaled(params: MatrixParams) -> float:
    # Variant with the rate-scaled base (M/q_tilde)^b_tilde; kept only for
    # comparison, the exact Gamma ratio arbitrates. It differs from the
    # exact value by the constant factor q_tilde^b_tilde in the limit.
    bt = params.b_tilde
    return params.N * math.exp(gammaln(1 + bt) - bt * math.log(params.M / params.q_tilde))


def steady_allones_count_reports(params: MatrixParams) -> tuple[ClosedFormReport, ...]:
    """All steady-count estimates, each tagged with its formula id."""
    return (
        ClosedFormReport(steady_allones_count(params, EXACT), EXACT, "steady_count_gamma_ratio"),
        ClosedFormReport(steady_allones_count(params, ASYMPTOTIC), ASYMPTOTIC, "steady_count_power_law"),
        ClosedFormReport(
            _steady_allones_count_asymptotic_rate_scaled(params),
            ASYMPTOTIC,
            "steady_count_power_law_rate_scaled",
        ),
    )


def transition_time_prediction(params: MatrixParams) -> float:
    """Predicted equilibration time M * log(M) / q_tilde of the matrix chain."""
    return params.M * math.log(params.M) / params.q_tilde


def transition_time_report(params: MatrixParams) -> ClosedFormReport:
    return ClosedFormReport(transition_time_prediction(params), ASYMPTOTIC, "transition_time_mlogm")


def identify_parameters(
    p_d: float, N: int, p_m: float, M: int
) -> tuple[SingleColumnParams, MatrixParams]:
    """Map per-step probabilities (p_d, p_m) to continuous-rate parameters.

    The matrix chain uses p = p_d and lambda_m = p_m * M directly. The
    single-column view of one fixed component sees resets thinned by the
    number of components (p = p_d / N) and updates sped up by the entry
    channel (alpha = 1 + lambda_m).
    """
    if not 0.0 < p_d < 1.0:
        raise ValueError(f"p_d must lie in (0, 1), got {p_d!r}")
    if p_m < 0:
        raise ValueError(f"p_m must be nonnegative, got {p_m!r}")
    lam = p_m * M
    single = SingleColumnParams(M=M, alpha=1.0 + lam, p=p_d / N)
    matrix = MatrixParams(M=M, N=N, p=p_d, lambda_m=lam)
    return single, matrix
