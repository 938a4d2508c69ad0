"""Post-processing of emitted matrices and node-level edits of the carried
diffusion state for evolving graphs."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .diffusion import DiffusionState
from .sparse import SparseMatrix


@dataclass(frozen=True)
class PostProcessConfig:
    symmetric_trick: bool = False
    drop_weights: bool = False
    undirected_average: bool = False


def drop_weights(x: SparseMatrix) -> SparseMatrix:
    """Replace every stored entry with 1 (keep edges, forget weights)."""
    return SparseMatrix._wrap(x.n_rows, x.n_cols, x.rows, x.cols,
                              np.ones(x.nnz))


def undirected_average(x: SparseMatrix) -> SparseMatrix:
    """(x + x^T) / 2 with weights retained."""
    if x.n_rows != x.n_cols:
        raise ValueError("matrix must be square")
    return SparseMatrix(x.n_rows, x.n_cols,
                        np.concatenate([x.rows, x.cols]),
                        np.concatenate([x.cols, x.rows]),
                        np.concatenate([x.vals, x.vals]) * 0.5)


def symmetric_trick(x: SparseMatrix) -> SparseMatrix:
    """Symmetrize, binarize and degree-normalize.

    The nonzero pattern is the union of x and its transpose; every kept edge
    gets weight 1 / sqrt(d_i * d_j) where d is the binarized degree. Raises
    if any node ends up isolated (cannot happen for matrices whose columns
    carry mass, as the diffusion outputs do).
    """
    if x.n_rows != x.n_cols:
        raise ValueError("matrix must be square")
    n = x.n_rows
    pattern = SparseMatrix(n, n,
                           np.concatenate([x.rows, x.cols]),
                           np.concatenate([x.cols, x.rows]),
                           np.ones(2 * x.nnz))
    rows, cols = pattern.rows, pattern.cols
    degree = np.bincount(rows, minlength=n)
    if n and degree.min() == 0:
        raise ValueError(
            f"node {int(np.argmin(degree))} is isolated after binarization")
    inv_sqrt = 1.0 / np.sqrt(degree.astype(np.float64))
    return SparseMatrix._wrap(n, n, rows, cols, inv_sqrt[rows] * inv_sqrt[cols])


def apply_post(x: SparseMatrix, cfg: PostProcessConfig) -> SparseMatrix:
    """Apply the configured post-processing.

    The symmetric trick subsumes undirected averaging; when both are set the
    averaging flag is ignored with a warning.
    """
    if cfg.symmetric_trick:
        if cfg.undirected_average:
            warnings.warn("undirected_average is subsumed by symmetric_trick; "
                          "ignoring it", stacklevel=2)
        return symmetric_trick(x)
    out = x
    if cfg.undirected_average:
        out = undirected_average(out)
    if cfg.drop_weights:
        out = drop_weights(out)
    return out


@dataclass(frozen=True)
class NodeRemoval:
    """Report returned by delete_node: old->new index mapping (-1 for the
    removed node) and columns left empty because the removed node held their
    entire mass."""

    mapping: np.ndarray
    emptied_columns: tuple[int, ...]


def insert_node(state: DiffusionState) -> DiffusionState:
    """Grow the carried matrix by one node at the last index with a unit
    diagonal entry; existing columns are untouched."""
    x = state.x_prev
    n = x.n_rows
    grown = SparseMatrix._wrap(n + 1, n + 1,
                               np.append(x.rows, n), np.append(x.cols, n),
                               np.append(x.vals, 1.0))
    return DiffusionState(grown, state.t)


def delete_node(state: DiffusionState, u: int) -> tuple[DiffusionState, NodeRemoval]:
    """Remove row and column u from the carried matrix and re-normalize the
    remaining columns. Columns that lose all their mass are left empty and
    reported in the removal record (new index space)."""
    x = state.x_prev
    n = x.n_rows
    if n < 2:
        raise ValueError("cannot delete from a single-node state")
    if not 0 <= u < n:
        raise IndexError(f"node {u} out of range [0, {n})")
    keep = (x.rows != u) & (x.cols != u)
    rows = x.rows[keep]
    cols = x.cols[keep]
    vals = x.vals[keep].copy()
    # Only columns that actually lost mass at row u are renormalized; the
    # rest keep their entries bit-for-bit (so insert-then-delete round-trips
    # exactly).
    lost = np.zeros(n, dtype=bool)
    lost[x.cols[x.rows == u]] = True
    lost[u] = False
    touched = lost[cols]
    if touched.any():
        sums = np.bincount(cols[touched], weights=vals[touched], minlength=n)
        positive = touched & (sums[cols] > 0.0)
        vals[positive] /= sums[cols[positive]]
    rows = rows - (rows > u)
    cols = cols - (cols > u)

    had_mass = np.bincount(x.cols[x.cols != u], minlength=n) > 0
    had_mass = np.delete(had_mass, u)
    emptied = np.flatnonzero(had_mass & (np.bincount(cols, minlength=n - 1) == 0))

    mapping = np.arange(n, dtype=np.int64)
    mapping[u] = -1
    mapping[u + 1:] -= 1
    return (DiffusionState(SparseMatrix._wrap(n - 1, n - 1, rows, cols, vals),
                           state.t),
            NodeRemoval(mapping, tuple(int(c) for c in emptied)))
