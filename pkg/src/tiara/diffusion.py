"""Time-aware random-walk diffusion over snapshot sequences.

Each step takes the current snapshot and the carried matrix from the
previous step, and produces an augmented adjacency matrix:

1. row-normalize the activated block of the self-looped snapshot,
2. approximate the restart-walk kernel on that block by a truncated power
   iteration (the rest of the graph contributes an exact identity),
3. blend the kernel (spatial term) with the kernel applied to the carried
   matrix (temporal term) using the decay ratio beta / (alpha + beta),
4. drop entries below the filtering threshold, and
5. re-normalize columns.

The carried matrix starts as the identity and stays column stochastic
throughout; the emitted matrix is its transpose by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._kernels import HAVE_NUMBA, fused_columns, iterate_panels
from .sparse import (CANCEL_EPS, NodeSet, SparseMatrix, column_normalize,
                     extract_block, row_normalize, spmm, transpose)

# Column-panel width for the blocked power iteration; sized so a panel pair
# stays cache-resident for blocks of a few thousand nodes.
_PANEL = 128

# Slot budget per fused-pass chunk (about 128 MB of scratch).
_CHUNK_SLOTS = 8_000_000


@dataclass(frozen=True)
class DiffusionConfig:
    """Restart/time-travel probabilities and approximation knobs.

    beta = 0 is allowed and reduces every step to an independent
    per-snapshot restart-walk kernel (no temporal term).
    """

    alpha: float = 0.25
    beta: float = 0.25
    iterations: int = 100
    epsilon: float = 1e-3
    symmetric_trick: bool = False
    drop_weights: bool = False
    transpose_output: bool = True
    converge_tol: float | None = None

    def __post_init__(self):
        if not (self.alpha > 0.0 and self.beta >= 0.0):
            raise ValueError("alpha must be positive and beta non-negative")
        if not 0.0 < self.alpha + self.beta < 1.0:
            raise ValueError(
                f"alpha + beta must lie in (0, 1), got {self.alpha + self.beta}")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.converge_tol is not None and self.converge_tol <= 0.0:
            raise ValueError("converge_tol must be positive when given")

    @property
    def temporal_decay(self) -> float:
        """Weight of the temporal term: beta / (alpha + beta)."""
        return self.beta / (self.alpha + self.beta)

    @property
    def continuation(self) -> float:
        """Probability of continuing the walk: 1 - alpha - beta."""
        return 1.0 - self.alpha - self.beta


@dataclass(frozen=True, eq=False)
class DiffusionState:
    """The carried column-stochastic matrix and the step index it belongs to."""

    x_prev: SparseMatrix
    t: int = 0

    def __post_init__(self):
        if self.x_prev.n_rows != self.x_prev.n_cols:
            raise ValueError("carried matrix must be square")
        if self.t < 0:
            raise ValueError("step index must be non-negative")
        sums = self.x_prev.col_sums()
        nonempty = np.bincount(self.x_prev.cols,
                               minlength=self.x_prev.n_cols) > 0
        if np.any(np.abs(sums[nonempty] - 1.0) > 1e-9):
            raise ValueError("carried matrix columns must sum to 1")

    @classmethod
    def initial(cls, n: int) -> "DiffusionState":
        return cls(SparseMatrix.identity(n), 0)


@dataclass(frozen=True, eq=False)
class Kernel:
    """Column-stochastic walk kernel on the activated block; the rest of the
    node universe is an implicit (exact) identity."""

    block: SparseMatrix
    activated: NodeSet

    def __post_init__(self):
        n_t = len(self.activated)
        if self.block.n_rows != n_t or self.block.n_cols != n_t:
            raise ValueError("kernel block must be square over the activated set")
        if n_t:
            sums = self.block.col_sums()
            if np.any(np.abs(sums - 1.0) > 1e-9):
                raise ValueError("kernel block columns must sum to 1")


def power_iteration_error_bound(continuation: float, iterations: int) -> float:
    """Upper bound on the L1 column error of the truncated iterate against
    the exact inverse: c^K * c / (1 - c)."""
    c = continuation
    return c ** iterations * c / (1.0 - c)


def power_iterate_raw(a_norm_block: SparseMatrix, continuation: float,
                      iterations: int,
                      converge_tol: float | None = None) -> np.ndarray:
    """Run M <- I + c * A^T M for `iterations` rounds from M = I and return
    the dense iterate (before scaling and normalization)."""
    n_t = a_norm_block.n_rows
    if a_norm_block.n_cols != n_t:
        raise ValueError("activated block must be square")
    if n_t == 0:
        return np.zeros((0, 0))
    csc = a_norm_block.to_csc()
    # The CSC arrays of the block are the CSR arrays of its transpose.
    b = sp.csr_matrix((csc.data * continuation, csc.indices, csc.indptr),
                      shape=(n_t, n_t))
    if HAVE_NUMBA and converge_tol is None:
        return iterate_panels(b.indptr.astype(np.int64),
                              b.indices.astype(np.int64),
                              b.data, iterations, n_t, _PANEL)
    m = np.eye(n_t)
    for _ in range(iterations):
        nxt = b @ m
        nxt.flat[:: n_t + 1] += 1.0
        if converge_tol is not None and np.abs(nxt - m).max() < converge_tol:
            return nxt
        m = nxt
    return m


def _normalized_kernel_dense(m: np.ndarray, scale: float) -> np.ndarray:
    kern = scale * m
    if kern.size:
        kern /= kern.sum(axis=0)
    return kern


def power_iteration(a_norm_block: SparseMatrix, cfg: DiffusionConfig,
                    activated: NodeSet | None = None) -> Kernel:
    """Column-normalized (1-c) * M^(K) on the activated block."""
    m = power_iterate_raw(a_norm_block, cfg.continuation, cfg.iterations,
                          cfg.converge_tol)
    kern = _normalized_kernel_dense(m, 1.0 - cfg.continuation)
    if activated is None:
        activated = NodeSet.full(a_norm_block.n_rows)
    return Kernel(SparseMatrix.from_dense(kern), activated)


def spatial_augmenter(kernel: Kernel) -> SparseMatrix:
    """Embed the kernel block into the full node universe with unit diagonal
    entries for non-activated nodes."""
    n = kernel.activated.universe_size
    act = kernel.activated.members
    block = kernel.block
    n_t = act.size
    if n_t == 0:
        return SparseMatrix.identity(n)
    if n_t == n:
        return block
    col_counts = np.bincount(block.cols, minlength=n_t)
    counts = np.ones(n, dtype=np.int64)
    counts[act] = col_counts
    indptr = np.concatenate([[0], np.cumsum(counts)])
    rows = np.empty(indptr[-1], dtype=np.int64)
    vals = np.empty(indptr[-1])
    nonact = kernel.activated.complement().members
    rows[indptr[nonact]] = nonact
    vals[indptr[nonact]] = 1.0
    block_start = np.concatenate([[0], np.cumsum(col_counts)])
    dest = indptr[act[block.cols]] + (np.arange(block.nnz) - block_start[block.cols])
    rows[dest] = act[block.rows]
    vals[dest] = block.vals
    cols = np.repeat(np.arange(n, dtype=np.int64), counts)
    return SparseMatrix._wrap(n, n, rows, cols, vals)


def temporal_augmenter(s: SparseMatrix, x_prev: SparseMatrix,
                       activated: NodeSet | None = None) -> SparseMatrix:
    """Product s @ x_prev.

    With `activated` given, s must be identity outside the activated block
    (which the spatial augmenter guarantees); only the block rows are
    multiplied and the remaining rows of x_prev pass through unchanged. The
    entry set matches the plain sparse product exactly, including its
    sub-CANCEL_EPS dust filter.
    """
    if s.n_cols != x_prev.n_rows:
        raise ValueError(
            f"dimension mismatch: {s.n_rows}x{s.n_cols} @ "
            f"{x_prev.n_rows}x{x_prev.n_cols}")
    if activated is None:
        return spmm(s, x_prev)
    n, m = s.n_rows, x_prev.n_cols
    act = activated.members
    s_block = extract_block(s, activated, activated)
    x_act = extract_block(x_prev, activated, NodeSet.full(m))
    prod = s_block.to_csr() @ x_act.to_csr()
    prod.sort_indices()
    prod.data[np.abs(prod.data) < CANCEL_EPS] = 0.0
    prod.eliminate_zeros()

    passthrough = x_prev.to_csr()
    passthrough.data[np.abs(passthrough.data) < CANCEL_EPS] = 0.0
    passthrough.eliminate_zeros()

    row_counts = np.diff(passthrough.indptr).astype(np.int64)
    row_counts[act] = np.diff(prod.indptr)
    indptr = np.concatenate([[0], np.cumsum(row_counts)])
    indices = np.empty(indptr[-1], dtype=np.int64)
    data = np.empty(indptr[-1])
    nonact = activated.complement().members
    for i in nonact.tolist():
        lo, hi = passthrough.indptr[i], passthrough.indptr[i + 1]
        dst = indptr[i]
        indices[dst:dst + hi - lo] = passthrough.indices[lo:hi]
        data[dst:dst + hi - lo] = passthrough.data[lo:hi]
    for bi, i in enumerate(act.tolist()):
        lo, hi = prod.indptr[bi], prod.indptr[bi + 1]
        dst = indptr[i]
        indices[dst:dst + hi - lo] = prod.indices[lo:hi]
        data[dst:dst + hi - lo] = prod.data[lo:hi]
    out = sp.csr_matrix((data, indices, indptr), shape=(n, m)).tocsc()
    out.sort_indices()
    return SparseMatrix._from_csc(out)


def combine(s: SparseMatrix, t_mat: SparseMatrix, gamma: float) -> SparseMatrix:
    """Convex combination (1 - gamma) * s + gamma * t_mat.

    gamma = 0 returns s itself, skipping the arithmetic entirely.
    """
    if s.shape != t_mat.shape:
        raise ValueError("matrices must share a shape to combine")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    if gamma == 0.0:
        return s
    c = s.to_csc() * (1.0 - gamma) + t_mat.to_csc() * gamma
    c.sort_indices()
    c.eliminate_zeros()
    return SparseMatrix._from_csc(c)


def sparsify(x: SparseMatrix, epsilon: float) -> SparseMatrix:
    """Drop entries strictly below epsilon.

    epsilon = 0 is the identity transform. A column whose entries all fall
    below the threshold keeps its single largest entry (first one in entry
    order on ties) so that column normalization stays well defined.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValueError("epsilon must lie in [0, 1)")
    if epsilon == 0.0 or x.nnz == 0:
        return x
    keep = x.vals >= epsilon
    if keep.all():
        return x
    before = np.bincount(x.cols, minlength=x.n_cols) > 0
    after = np.bincount(x.cols[keep], minlength=x.n_cols) > 0
    for c in np.flatnonzero(before & ~after).tolist():
        lo = np.searchsorted(x.cols, c, side="left")
        hi = np.searchsorted(x.cols, c, side="right")
        keep[lo + int(np.argmax(x.vals[lo:hi]))] = True
    return SparseMatrix._wrap(x.n_rows, x.n_cols, x.rows[keep], x.cols[keep],
                              x.vals[keep])


def _step_composed(a_t: SparseMatrix, activated: NodeSet,
                   state: DiffusionState, cfg: DiffusionConfig) -> SparseMatrix:
    block_adj = extract_block(a_t, activated, activated)
    a_norm = row_normalize(block_adj) if len(activated) else block_adj
    kernel = power_iteration(a_norm, cfg, activated)
    s = spatial_augmenter(kernel)
    if cfg.beta == 0.0:
        x = s
    else:
        t_mat = temporal_augmenter(s, state.x_prev, activated)
        x = combine(s, t_mat, cfg.temporal_decay)
    return column_normalize(sparsify(x, cfg.epsilon))


def _step_fused(a_t: SparseMatrix, activated: NodeSet,
                state: DiffusionState, cfg: DiffusionConfig) -> SparseMatrix:
    # Same arithmetic as _step_composed, but the product, blend and filter
    # run column-by-column in one compiled pass and the dense intermediate
    # is never materialized.
    n = a_t.n_rows
    act = activated.members
    n_t = act.size
    block_adj = extract_block(a_t, activated, activated)
    a_norm = row_normalize(block_adj) if n_t else block_adj
    m = power_iterate_raw(a_norm, cfg.continuation, cfg.iterations,
                          cfg.converge_tol)
    kern = _normalized_kernel_dense(m, 1.0 - cfg.continuation)
    block_t = np.ascontiguousarray(kern.T)
    pos = np.full(n, -1, dtype=np.int64)
    pos[act] = np.arange(n_t, dtype=np.int64)

    if cfg.beta == 0.0:
        gamma = 0.0
        xp = np.zeros(n + 1, dtype=np.int64)
        xi = np.empty(0, dtype=np.int64)
        xd = np.empty(0)
    else:
        gamma = cfg.temporal_decay
        xc = state.x_prev.to_csc()
        xp = xc.indptr.astype(np.int64)
        xi = xc.indices.astype(np.int64)
        xd = xc.data

    caps = np.diff(xp) + (n_t + 2)
    cum = np.concatenate([[0], np.cumsum(caps)])
    rows_parts = [np.empty(0, dtype=np.int64)]
    cols_parts = [np.empty(0, dtype=np.int64)]
    vals_parts = [np.empty(0)]
    j0 = 0
    while j0 < n:
        j1 = int(np.searchsorted(cum, cum[j0] + _CHUNK_SLOTS, side="right")) - 1
        j1 = min(n, max(j0 + 1, j1))
        offs = cum[j0:j1] - cum[j0]
        counts = np.zeros(j1 - j0, dtype=np.int64)
        out_rows = np.empty(int(cum[j1] - cum[j0]), dtype=np.int64)
        out_vals = np.empty(out_rows.size)
        fused_columns(block_t, act, pos, xp, xi, xd, j0, gamma,
                      cfg.epsilon, CANCEL_EPS, offs, out_rows, out_vals, counts)
        within = np.arange(int(counts.sum()), dtype=np.int64)
        within -= np.repeat(np.concatenate([[0], np.cumsum(counts[:-1])]), counts)
        take = np.repeat(offs, counts) + within
        rows_parts.append(out_rows[take])
        vals_parts.append(out_vals[take])
        cols_parts.append(np.repeat(np.arange(j0, j1, dtype=np.int64), counts))
        j0 = j1
    x_f = SparseMatrix._wrap(n, n, np.concatenate(rows_parts),
                             np.concatenate(cols_parts),
                             np.concatenate(vals_parts))
    return column_normalize(x_f)


def step(a_t: SparseMatrix, activated: NodeSet, state: DiffusionState,
         cfg: DiffusionConfig) -> tuple[SparseMatrix, DiffusionState]:
    """One diffusion step; returns the emitted matrix and the new state."""
    if a_t.n_rows != a_t.n_cols:
        raise ValueError("snapshots must be square")
    if a_t.n_rows != state.x_prev.n_rows:
        raise ValueError("snapshot and state dimensions differ")
    if activated.universe_size != a_t.n_rows:
        raise ValueError("activated set universe must match the snapshot")
    if HAVE_NUMBA:
        x_tilde = _step_fused(a_t, activated, state, cfg)
    else:
        x_tilde = _step_composed(a_t, activated, state, cfg)
    new_state = DiffusionState(x_tilde, state.t + 1)
    out = transpose(x_tilde) if cfg.transpose_output else x_tilde
    if cfg.symmetric_trick or cfg.drop_weights:
        from .dynamics import PostProcessConfig, apply_post
        out = apply_post(out, PostProcessConfig(
            symmetric_trick=cfg.symmetric_trick,
            drop_weights=cfg.drop_weights))
    return out, new_state


def iter_augmented(seq, cfg: DiffusionConfig):
    """Fold `step` over the sequence, yielding one matrix per snapshot.

    Only the current state and output are held in memory at any time.
    """
    state = DiffusionState.initial(seq.n)
    for a_t, act in zip(seq.snapshots, seq.activated):
        out, state = step(a_t, act, state, cfg)
        yield out


def run(seq, cfg: DiffusionConfig) -> list[SparseMatrix]:
    """Convenience list collection of iter_augmented."""
    return list(iter_augmented(seq, cfg))
