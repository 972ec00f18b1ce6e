"""Perfect sampling of the matrix chain's stationary law by time reversal.

Running the stationary chain backwards, the first backward occurrence of
each event label decides the matrix: a column that resets "forbids" all
later (in reversal order) writes into it, a row event writes ones into
the still-undetermined entries of its row, an entry event writes a
single one. Every entry is written at most once (write-once), and the
draw is an exact sample of the stationary distribution once every entry
is determined.

The jump-chain event probabilities are ``p/(1+N*lambda_m)`` for a column,
``q/(1+N*lambda_m)`` for a row and ``lambda_m*N/(1+N*lambda_m)`` for an
entry. The construction only depends on which label rings first, so it
is equivalent to racing independent exponential clocks (rates q/M per
row, p/N per column, lambda_m/M per entry); that race form is exposed in
:func:`sample_invariant_coupled`, where sharing clocks across different
lambda_m values yields an entrywise-monotone coupling.

Internally a draw works on bit masks (bit ``i*N + j`` is entry (i, j)):
``det`` marks determined entries, ``emitted`` the ones among them. The
stopping rule is full determination, which subsumes "all columns
forbidden or all rows set" and also covers the entry channel.
"""

from __future__ import annotations

import numpy as np

from .models import MatrixParams, MatrixState
from .rng import as_generator, replicate_rng

__all__ = [
    "sample_invariant",
    "sample_invariant_pai_off",
    "sample_invariant_pai_on",
    "sample_invariant_histogram",
    "sample_invariant_coupled",
]

_DEFAULT_MAX_STEPS = 10**9
_BLOCK = 8192


def _draw_mask(M, N, thr_row, thr_col, row_bits, col_bits, full_mask,
               buf_state, rng, max_steps, trace=None):
    """One stationary draw as an ``emitted`` bit mask.

    ``buf_state`` is a [buffer, cursor] pair shared across draws so batch
    callers keep one uniform stream. Raises if the draw does not
    terminate within ``max_steps`` (a diagnostic guard; termination is
    almost surely finite).
    """
    buf, pos = buf_state
    n_buf = buf.size
    MN = M * N
    det = 0
    emitted = 0
    steps = 0
    while det != full_mask:
        if steps >= max_steps:
            raise RuntimeError(f"reversal draw exceeded {max_steps} steps without terminating")
        steps += 1
        if pos + 2 > n_buf:
            buf = rng.random(n_buf)
            pos = 0
        u_class = buf[pos]
        u_index = buf[pos + 1]
        pos += 2
        if u_class < thr_row:
            j = int(u_index * M)
            bits = row_bits[j]
            newly = bits & ~det
            emitted |= newly
            det |= bits
            if trace is not None:
                trace.append(("row", j, newly))
        elif u_class < thr_col:
            i = int(u_index * N)
            newly = col_bits[i] & ~det
            det |= col_bits[i]
            if trace is not None:
                trace.append(("column", i, newly))
        else:
            e = int(u_index * MN)
            bit = 1 << e
            if not det & bit:
                emitted |= bit
                det |= bit
                if trace is not None:
                    trace.append(("entry", e, bit))
            elif trace is not None:
                trace.append(("entry", e, 0))
    buf_state[0] = buf
    buf_state[1] = pos
    return emitted


def _thresholds(params: MatrixParams) -> tuple[float, float]:
    norm = 1.0 + params.N * params.lambda_m
    thr_row = params.q / norm
    thr_col = (params.q + params.p) / norm
    return thr_row, thr_col


def _bit_tables(M: int, N: int):
    row_bits = [sum(1 << (i * N + j) for j in range(N)) for i in range(M)]
    col_bits = [sum(1 << (i * N + j) for i in range(M)) for j in range(N)]
    return row_bits, col_bits, (1 << (M * N)) - 1


def sample_invariant(
    params: MatrixParams,
    seed: int | np.random.Generator,
    max_steps: int = _DEFAULT_MAX_STEPS,
    trace: list | None = None,
) -> MatrixState:
    """One exact draw from the stationary law of the matrix chain.

    ``seed`` may be an integer or a Generator (which is advanced).
    ``trace``, when a list, collects ``(kind, index, newly_determined_mask)``
    records per reversal step for property checks.
    """
    rng = as_generator(seed)
    thr_row, thr_col = _thresholds(params)
    row_bits, col_bits, full_mask = _bit_tables(params.M, params.N)
    block = max(256, 4 * (params.M + params.N))
    buf_state = [rng.random(block), 0]
    mask = _draw_mask(
        params.M, params.N, thr_row, thr_col, row_bits, col_bits, full_mask,
        buf_state, rng, max_steps, trace=trace,
    )
    return MatrixState.from_index(params.M, params.N, mask)


def sample_invariant_pai_off(
    params: MatrixParams, seed: int | np.random.Generator, max_steps: int = _DEFAULT_MAX_STEPS
) -> MatrixState:
    """Stationary draw with the entry channel off; requires lambda_m = 0."""
    if params.lambda_m != 0.0:
        raise ValueError("sample_invariant_pai_off requires lambda_m = 0")
    return sample_invariant(params, seed, max_steps=max_steps)


def sample_invariant_pai_on(
    params: MatrixParams, seed: int | np.random.Generator, max_steps: int = _DEFAULT_MAX_STEPS
) -> MatrixState:
    """Stationary draw with the entry channel active (any lambda_m >= 0)."""
    return sample_invariant(params, seed, max_steps=max_steps)


def sample_invariant_histogram(
    params: MatrixParams,
    n_draws: int,
    master_seed: int,
    max_steps: int = _DEFAULT_MAX_STEPS,
) -> np.ndarray:
    """Counts over all 2^(M*N) states from repeated stationary draws.

    Uses a single replicate stream keyed by ``(master_seed, 0)`` and the
    same per-draw core as :func:`sample_invariant`, so the batch is
    deterministic in ``(master_seed, n_draws)``. Meant for the
    total-variation comparisons against the dense oracle; requires
    M*N <= 20.
    """
    M, N = params.M, params.N
    if M * N > 20:
        raise ValueError("histogram over all states needs M*N <= 20")
    if n_draws < 1:
        raise ValueError("need at least one draw")
    rng = replicate_rng(master_seed, 0)
    thr_row, thr_col = _thresholds(params)
    row_bits, col_bits, full_mask = _bit_tables(M, N)
    counts = np.zeros(full_mask + 1, dtype=np.int64)
    buf_state = [rng.random(_BLOCK), 0]
    for _ in range(n_draws):
        mask = _draw_mask(
            M, N, thr_row, thr_col, row_bits, col_bits, full_mask,
            buf_state, rng, max_steps,
        )
        counts[mask] += 1
    return counts


def sample_invariant_coupled(
    params: MatrixParams,
    lambda_values,
    seed: int | np.random.Generator,
) -> list[MatrixState]:
    """Coupled stationary draws across increasing entry rates.

    Materializes the exponential race directly: shared first-ring times
    R_i ~ Exp(q/M) and C_j ~ Exp(p/N), plus per-entry clocks built
    incrementally so the clock at a larger lambda_m is the minimum of
    the smaller one and an independent increment. Entry (i, j) is one
    exactly when ``min(R_i, E_ij) < C_j``, hence the draw at a larger
    lambda_m dominates entrywise. Each draw has the stationary law of
    the chain with that lambda_m (params.p, M, N fixed).
    """
    lams = [float(l) for l in lambda_values]
    if not lams:
        raise ValueError("need at least one lambda value")
    if any(l < 0 for l in lams):
        raise ValueError("lambda values must be nonnegative")
    if any(b < a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambda values must be nondecreasing")
    rng = as_generator(seed)
    M, N = params.M, params.N
    row_rings = rng.exponential(scale=M / params.q, size=M)
    col_rings = rng.exponential(scale=N / params.p, size=N)
    entry_rings = np.full((M, N), np.inf)
    out = []
    prev = 0.0
    for lam in lams:
        delta = lam - prev
        if delta > 0:
            entry_rings = np.minimum(entry_rings, rng.exponential(scale=M / delta, size=(M, N)))
        prev = lam
        ones = np.minimum(row_rings[:, None], entry_rings) < col_rings[None, :]
        out.append(MatrixState.from_entries(ones.astype(np.uint8)))
    return out
