"""Independent reference implementations used for verification.

Dense linear algebra for the exact kernels, recurrence and closed form, a
vectorized random-surfer simulation for distribution-level cross-checks,
and the eigenvalue-gap metric for sparsification error curves. Nothing here
shares code with the sparse pipeline beyond the matrix carrier itself, and
all dense paths are capped at MAX_DENSE nodes to keep their O(n^3) cost
honest.
"""

from __future__ import annotations

import numpy as np

from .ingest import SnapshotSequence
from .sparse import SparseMatrix

MAX_DENSE = 512


def _check_size(n: int) -> None:
    if n > MAX_DENSE:
        raise ValueError(f"dense oracle is capped at {MAX_DENSE} nodes, got {n}")


def densify(m: SparseMatrix) -> np.ndarray:
    _check_size(max(m.n_rows, m.n_cols))
    return m.to_dense()


def _as_dense(x) -> np.ndarray:
    if isinstance(x, SparseMatrix):
        return densify(x)
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a matrix")
    _check_size(max(arr.shape))
    return arr


def row_normalized_dense(a) -> np.ndarray:
    a = _as_dense(a)
    sums = a.sum(axis=1)
    if np.any(sums <= 0.0):
        raise ValueError("every row needs positive mass to normalize")
    return a / sums[:, None]


def _check_probs(alpha: float, beta: float) -> None:
    if not (alpha > 0.0 and beta >= 0.0 and 0.0 < alpha + beta < 1.0):
        raise ValueError("need alpha > 0, beta >= 0 and alpha + beta in (0, 1)")


def exact_kernel(a_norm, alpha: float, beta: float) -> np.ndarray:
    """(alpha + beta) * (I - c A^T)^-1 with c = 1 - alpha - beta, by LU solve."""
    _check_probs(alpha, beta)
    a_norm = _as_dense(a_norm)
    n = a_norm.shape[0]
    c = 1.0 - alpha - beta
    lhs = np.eye(n) - c * a_norm.T
    return np.linalg.solve(lhs, (alpha + beta) * np.eye(n))


def exact_recurrence(seq: SnapshotSequence, alpha: float, beta: float,
                     t: int) -> np.ndarray:
    """Exact diffusion matrix after t steps (t is 1-based; t=0 would be I):
    X_i = alpha * L_i^-1 + beta * L_i^-1 X_{i-1}, X_0 = I.

    The pipeline approximates the same object through truncated power
    iteration plus column renormalization, so small systematic gaps are
    expected at low iteration counts; they shrink geometrically with the
    iteration count (see power_iteration_error_bound).
    """
    _check_probs(alpha, beta)
    if not 1 <= t <= seq.T:
        raise ValueError(f"t must lie in [1, {seq.T}]")
    _check_size(seq.n)
    c = 1.0 - alpha - beta
    x = np.eye(seq.n)
    for i in range(t):
        a_norm = row_normalized_dense(seq.snapshots[i])
        linv = np.linalg.solve(np.eye(seq.n) - c * a_norm.T, np.eye(seq.n))
        x = alpha * linv + beta * (linv @ x)
    return x


def locality_weights(gamma: float, t: int) -> np.ndarray:
    """Coefficients of the closed form by age: weight of the product ending
    i steps in the past is (1 - gamma) * gamma^i for i < t - 1, and the
    initial-step term carries gamma^(t-1)."""
    if t < 1:
        raise ValueError("t must be at least 1")
    w = (1.0 - gamma) * gamma ** np.arange(t, dtype=np.float64)
    w[t - 1] = gamma ** (t - 1)
    return w


def closed_form(seq: SnapshotSequence, alpha: float, beta: float,
                t: int) -> np.ndarray:
    """Evaluate the geometric-sum closed form of the recurrence: a weighted
    sum of kernel products reaching ever further into the past."""
    _check_probs(alpha, beta)
    if not 1 <= t <= seq.T:
        raise ValueError(f"t must lie in [1, {seq.T}]")
    _check_size(seq.n)
    kernels = [exact_kernel(row_normalized_dense(seq.snapshots[i]), alpha, beta)
               for i in range(t)]
    gamma = beta / (alpha + beta)
    w = locality_weights(gamma, t)
    prod = kernels[t - 1]
    x = w[0] * prod
    for i in range(1, t):
        prod = prod @ kernels[t - 1 - i]
        x += w[i] * prod
    return x


class _WalkTable:
    """Inverse-CDF sampling structure for one row-stochastic matrix."""

    __slots__ = ("keys", "targets")

    def __init__(self, a_norm: np.ndarray):
        rows, cols = np.nonzero(a_norm)
        vals = a_norm[rows, cols]
        counts = np.bincount(rows, minlength=a_norm.shape[0])
        if counts.min() == 0:
            raise ValueError("walk requires every node to have an out-edge")
        ends = np.cumsum(counts)
        cum = np.cumsum(vals)
        offsets = np.concatenate([[0.0], cum[ends[:-1] - 1]])
        cum -= np.repeat(offsets, counts)
        cum[ends - 1] = 1.0  # guard against round-off undershoot
        self.keys = rows + cum
        self.targets = cols.astype(np.int64)

    def move(self, nodes: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        j = np.searchsorted(self.keys, nodes + uniforms, side="right")
        return self.targets[j]


def _simulate_walk(table: _WalkTable, x: np.ndarray, cont: float, rng) -> np.ndarray:
    x = x.copy()
    alive = np.arange(x.size)
    while alive.size:
        moving = rng.random(alive.size) < cont
        walkers = alive[moving]
        if walkers.size:
            x[walkers] = table.move(x[walkers], rng.random(walkers.size))
        alive = walkers
    return x


def monte_carlo_trwr(seq: SnapshotSequence, seed_node: int, alpha: float,
                     beta: float, t: int, walks: int,
                     rng_seed: int) -> np.ndarray:
    """Estimate the diffusion column for `seed_node` after t steps by direct
    simulation of the surfer.

    Each sample recursively draws a start node (the seed with probability
    alpha / (alpha + beta), otherwise a fresh sample from the previous step,
    bottoming out at the seed), then walks the current snapshot with
    continuation probability 1 - alpha - beta and reports where it stops.
    Walks are processed in fixed chunks, each with its own seeded stream, so
    the estimate is reproducible regardless of how chunks are scheduled.
    """
    _check_probs(alpha, beta)
    if not 1 <= t <= seq.T:
        raise ValueError(f"t must lie in [1, {seq.T}]")
    if walks < 1:
        raise ValueError("walks must be at least 1")
    if not 0 <= seed_node < seq.n:
        raise IndexError("seed node out of range")
    if rng_seed < 0:
        raise ValueError("rng_seed must be non-negative")
    _check_size(seq.n)

    tables = [_WalkTable(row_normalized_dense(seq.snapshots[i])) for i in range(t)]
    restart_p = alpha / (alpha + beta)
    cont = 1.0 - alpha - beta

    counts = np.zeros(seq.n, dtype=np.int64)
    chunk = 1 << 16
    for ci, lo in enumerate(range(0, walks, chunk)):
        size = min(chunk, walks - lo)
        rng = np.random.default_rng((rng_seed, ci))
        x = np.full(size, seed_node, dtype=np.int64)
        for i in range(t):
            restart = rng.random(size) < restart_p
            x = np.where(restart, seed_node, x)
            x = _simulate_walk(tables[i], x, cont, rng)
        counts += np.bincount(x, minlength=seq.n)
    return counts / walks


def total_variation(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return 0.5 * float(np.abs(p - q).sum())


def eigenvalue_error(x_exact, x_sparse) -> float:
    """2-norm of the gap between the sorted eigenvalue vectors of the two
    matrices. Eigenvalues come from a general dense solver and are paired
    after sorting by (real part, imaginary part), descending."""
    a = _as_dense(x_exact)
    b = _as_dense(x_sparse)
    if a.shape != b.shape:
        raise ValueError("matrices must share a shape")
    try:
        la = np.linalg.eigvals(a)
        lb = np.linalg.eigvals(b)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"eigenvalue solver did not converge: {exc}") from exc
    la = la[np.lexsort((-la.imag, -la.real))]
    lb = lb[np.lexsort((-lb.imag, -lb.real))]
    return float(np.linalg.norm(la - lb))
