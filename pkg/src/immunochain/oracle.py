"""Independent brute-force ground truth on small instances.

Everything here favours obvious correctness over speed: dense linear
algebra for stationary laws and first-passage moments, and exact integer
arithmetic for the coupon-collector count. These are the references the
closed forms and samplers are validated against before being trusted at
scale, so none of them share code with the quantities they check.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .models import MatrixParams, SingleColumnParams

__all__ = [
    "DenseGenerator",
    "single_column_generator",
    "matrix_generator",
    "stationary_solve",
    "hitting_moments",
    "single_column_hitting_moments_exact",
    "coupon_enumerate",
]

_ROW_SUM_TOL = 1e-12
_RESIDUAL_TOL = 1e-10

# State spaces above this are too big to enumerate densely.
_MAX_STATES = 1 << 16

# Brute-force coupon enumeration is only attempted below this many tuples.
_BRUTE_FORCE_LIMIT = 300_000


@dataclass
class DenseGenerator:
    """Dense CTMC generator: off-diagonal rates with diagonal = -row sum."""

    states: list
    rate_matrix: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.rate_matrix, dtype=float)
        n = len(self.states)
        if Q.shape != (n, n):
            raise ValueError(f"rate matrix shape {Q.shape} does not match {n} states")
        off = Q.copy()
        np.fill_diagonal(off, 0.0)
        if (off < 0).any():
            raise ValueError("off-diagonal rates must be nonnegative")
        scale = max(1.0, float(np.abs(Q).max()))
        if np.abs(Q.sum(axis=1)).max() > _ROW_SUM_TOL * scale:
            raise ValueError("generator rows must sum to zero")
        self.rate_matrix = Q

    @property
    def n_states(self) -> int:
        return len(self.states)


def single_column_generator(params: SingleColumnParams) -> DenseGenerator:
    """Dense generator of the single-column chain on states 0..M."""
    M = params.M
    Q = np.zeros((M + 1, M + 1))
    for k in range(M + 1):
        if k < M:
            Q[k, k + 1] += params.alpha * params.q * (1.0 - k / M)
        if k > 0:
            Q[k, 0] += params.p
    np.fill_diagonal(Q, Q.diagonal() - Q.sum(axis=1))
    return DenseGenerator(states=list(range(M + 1)), rate_matrix=Q)


def matrix_generator(params: MatrixParams) -> DenseGenerator:
    """Dense generator of the matrix chain over all 2^(M*N) binary states.

    States are integers whose bit ``i*N + j`` is entry (i, j), matching
    ``MatrixState.to_index``. Only feasible for M*N <= 16.
    """
    M, N = params.M, params.N
    if M * N > 16:
        raise ValueError(f"matrix state space 2^{M * N} exceeds the enumeration cap")
    n = 1 << (M * N)
    row_bits = [sum(1 << (i * N + j) for j in range(N)) for i in range(M)]
    col_bits = [sum(1 << (i * N + j) for i in range(M)) for j in range(N)]
    q_row = params.q / M
    p_col = params.p / N
    lam_entry = params.lambda_m / M

    Q = np.zeros((n, n))
    for s in range(n):
        for i in range(M):
            t = s | row_bits[i]
            if t != s:
                Q[s, t] += q_row
        for j in range(N):
            t = s & ~col_bits[j]
            if t != s:
                Q[s, t] += p_col
        if lam_entry > 0:
            for pos in range(M * N):
                bit = 1 << pos
                if not s & bit:
                    Q[s, s | bit] += lam_entry
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return DenseGenerator(states=list(range(n)), rate_matrix=Q)


def _closed_classes(Q: np.ndarray) -> tuple[int, np.ndarray]:
    """Closed communicating classes of the positive-rate digraph.

    Returns ``(count, member_mask)`` where the mask marks states that
    belong to some closed class (the recurrent states).
    """
    off = Q.copy()
    np.fill_diagonal(off, 0.0)
    adj = csr_matrix(off > 0)
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    has_exit = np.zeros(n_comp, dtype=bool)
    src, dst = adj.nonzero()
    for u, v in zip(src, dst):
        if labels[u] != labels[v]:
            has_exit[labels[u]] = True
    closed = ~has_exit
    return int(np.count_nonzero(closed)), closed[labels]


def stationary_solve(generator: DenseGenerator) -> np.ndarray:
    """Solve pi Q = 0, sum(pi) = 1 by state-elimination (GTH).

    The chain must have a unique closed communicating class (transient
    states are allowed and receive mass zero). Chains with several closed
    classes have no unique stationary law and are rejected.

    The Grassmann-Taksar-Heyman elimination uses no subtractions, so
    every entry of the result carries a small relative error even when
    it is many orders of magnitude below the largest - which plain LU
    cannot guarantee and which the entrywise comparisons here need.
    """
    Q = generator.rate_matrix
    n = generator.n_states
    if n > _MAX_STATES:
        raise ValueError("state space too large for a dense solve")
    n_closed, recurrent = _closed_classes(Q)
    if n_closed != 1:
        raise ValueError(
            f"chain has {n_closed} closed communicating classes; stationary law is not unique"
        )
    # Order the closed class first so every elimination pivot is positive;
    # transient states then provably receive zero mass on back-substitution.
    order = np.concatenate([np.flatnonzero(recurrent), np.flatnonzero(~recurrent)])
    A = Q[np.ix_(order, order)].copy()
    np.fill_diagonal(A, 0.0)

    outflow = np.zeros(n)  # total rate of state m into lower states at elimination
    for m in range(n - 1, 0, -1):
        s = A[m, :m].sum()
        if s <= 0.0:
            raise ValueError("elimination pivot vanished; chain structure is degenerate")
        outflow[m] = s
        A[m, :m] /= s
        A[:m, :m] += np.outer(A[:m, m], A[m, :m])

    pi_ordered = np.zeros(n)
    pi_ordered[0] = 1.0
    for m in range(1, n):
        pi_ordered[m] = pi_ordered[:m] @ A[:m, m] / outflow[m]
    pi_ordered /= pi_ordered.sum()

    pi = np.zeros(n)
    pi[order] = pi_ordered
    residual = float(np.abs(pi @ Q).max())
    if residual > _RESIDUAL_TOL:
        raise ValueError(f"stationary residual {residual:.3e} exceeds {_RESIDUAL_TOL}")
    return pi


def _reaches(Q: np.ndarray, target: set[int]) -> np.ndarray:
    """Boolean mask of states from which the target set is reachable."""
    n = Q.shape[0]
    off = Q.copy()
    np.fill_diagonal(off, 0.0)
    reached = np.zeros(n, dtype=bool)
    stack = list(target)
    for s in target:
        reached[s] = True
    preds = [np.flatnonzero(off[:, v] > 0) for v in range(n)]
    while stack:
        v = stack.pop()
        for u in preds[v]:
            if not reached[u]:
                reached[u] = True
                stack.append(int(u))
    return reached


def hitting_moments(generator: DenseGenerator, target_set) -> tuple[np.ndarray, np.ndarray]:
    """First and second moments of the continuous-time hitting time.

    Solves the absorbing linear systems ``Q m = -1`` and ``Q s = -2m``
    restricted to non-target states; entries on the target are zero.
    Returns ``(mean_vector, second_moment_vector)`` indexed like
    ``generator.states``.

    Double precision limits this generic solve: when the moments are
    astronomically large the relative accuracy degrades with the
    condition number. :func:`single_column_hitting_moments_exact` covers
    that regime for the single-column chain with exact rationals.
    """
    Q = generator.rate_matrix
    n = generator.n_states
    target = {int(t) for t in target_set}
    if not target:
        raise ValueError("target set must be nonempty")
    if any(not 0 <= t < n for t in target):
        raise ValueError("target indices out of range")
    if not _reaches(Q, target).all():
        raise ValueError("target is not reachable from every state")
    rest = [s for s in range(n) if s not in target]
    mean = np.zeros(n)
    second = np.zeros(n)
    if rest:
        Qtt = Q[np.ix_(rest, rest)]
        try:
            m = np.linalg.solve(Qtt, -np.ones(len(rest)))
            s = np.linalg.solve(Qtt, -2.0 * m)
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"first-passage system is singular: {exc}") from exc
        mean[rest] = m
        second[rest] = s
    return mean, second


def single_column_hitting_moments_exact(
    params: SingleColumnParams, with_second_moment: bool = True
) -> tuple[list[Fraction], list[Fraction] | None]:
    """Exact first-passage moments of the single-column chain, to state M.

    Gaussian elimination of the continuous-time systems ``Q m = -1`` and
    ``Q s = -2m`` in exact rational arithmetic (the float rates are taken
    at their exact dyadic values). Eliminating from state M-1 downward
    expresses every unknown as ``c_i + d_i * x_0`` with one closing
    equation at 0, so the solve is O(M) with no roundoff at all - this
    is the reference for regimes where the moments overflow what a
    double-precision dense solve can certify.

    Returns ``(means, second_moments)`` as Fractions indexed by start
    state 0..M (zero at the absorbed state M). The second-moment solve
    roughly doubles the cost and can be skipped when only means are
    compared.
    """
    M = params.M
    alpha = Fraction(params.alpha)
    q = Fraction(1) - Fraction(params.p)
    p = Fraction(params.p)
    up = [alpha * q * (M - k) / M for k in range(M)]

    def solve(rhs: list[Fraction]) -> list[Fraction]:
        # x_i = c_i + d_i * x_0 for i >= 1, closed by the equation at 0.
        c = [Fraction(0)] * (M + 1)
        d = [Fraction(0)] * (M + 1)
        for i in range(M - 1, 0, -1):
            denom = up[i] + p
            c[i] = (rhs[i] + up[i] * c[i + 1]) / denom
            d[i] = (up[i] * d[i + 1] + p) / denom
        if M == 1:
            x0 = rhs[0] / up[0]
        else:
            x0 = (rhs[0] / up[0] + c[1]) / (1 - d[1])
        out = [Fraction(0)] * (M + 1)
        out[0] = x0
        for i in range(1, M):
            out[i] = c[i] + d[i] * x0
        return out

    means = solve([Fraction(1)] * M)
    if not with_second_moment:
        return means, None
    seconds = solve([2 * means[i] for i in range(M)])
    return means, seconds


def _surjection_count_dp(n_urns: int, k: int) -> int:
    """Exact count of surjections [k] -> [n_urns] via the Stirling recurrence."""
    # S(r, j): surjection-partition table row by row; exact integers.
    prev = [1] + [0] * n_urns  # r = 0
    for _ in range(k):
        cur = [0] * (n_urns + 1)
        for j in range(1, n_urns + 1):
            cur[j] = j * prev[j] + prev[j - 1]
        prev = cur
    surj = prev[n_urns]
    for j in range(2, n_urns + 1):
        surj *= j
    return surj


def _surjection_count_brute(n_urns: int, k: int) -> int:
    """Count surjective draw tuples by full enumeration (tiny cases only)."""
    full = frozenset(range(n_urns))
    return sum(1 for tup in product(range(n_urns), repeat=k) if frozenset(tup) == full)


def coupon_enumerate(N: int, k: int) -> Fraction:
    """Exact probability that k uniform draws from N urns hit every urn.

    Counts surjective draw sequences in exact integer arithmetic -
    by exhaustive enumeration when ``N**k`` is tiny, otherwise through
    the Stirling-number recurrence (still exact). Returns a Fraction;
    floats appear only at comparison boundaries in callers.
    """
    if N < 1 or k < 0:
        raise ValueError("need N >= 1 and k >= 0")
    if k > 100_000:
        raise ValueError("k too large for exact enumeration")
    if k < N:
        return Fraction(0)
    if N**k <= _BRUTE_FORCE_LIMIT:
        surj = _surjection_count_brute(N, k)
    else:
        surj = _surjection_count_dp(N, k)
    return Fraction(surj, N**k)
