"""Sparse matrices as coordinate triples in a canonical column-major order.

This is the single carrier type for every matrix in the pipeline: snapshot
adjacency, diffusion kernels, augmenter outputs. Entries are kept sorted by
(column, row) with duplicates coalesced and explicit zeros dropped, so two
matrices are equal exactly when their entry lists are equal. Instances are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np
import scipy.sparse as sp

# Products whose magnitude falls below this are numerical dust from
# cancellation; spmm (and the block product built on it) drops them.
# Well below every tolerance used downstream.
CANCEL_EPS = 1e-15


class SparseMatrix:
    """Immutable real64 sparse matrix stored as sorted COO triples."""

    __slots__ = ("n_rows", "n_cols", "rows", "cols", "vals")

    def __init__(self, n_rows: int, n_cols: int, rows=(), cols=(), vals=()):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (rows.size == cols.size == vals.size):
            raise ValueError("rows, cols and vals must have equal length")
        if n_rows < 0 or n_cols < 0:
            raise ValueError("matrix dimensions must be non-negative")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_rows:
                raise ValueError("row index out of range")
            if cols.min() < 0 or cols.max() >= n_cols:
                raise ValueError("column index out of range")
        if not np.isfinite(vals).all():
            raise ValueError("matrix values must be finite")

        # Canonicalize: column-major order, duplicates summed, zeros dropped.
        if rows.size:
            order = np.lexsort((rows, cols))
            rows, cols, vals = rows[order], cols[order], vals[order]
            new_group = np.empty(rows.size, dtype=bool)
            new_group[0] = True
            np.logical_or(rows[1:] != rows[:-1], cols[1:] != cols[:-1],
                          out=new_group[1:])
            if not new_group.all():
                starts = np.flatnonzero(new_group)
                vals = np.add.reduceat(vals, starts)
                rows, cols = rows[starts], cols[starts]
            nz = vals != 0.0
            if not nz.all():
                rows, cols, vals = rows[nz], cols[nz], vals[nz]

        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.rows = rows
        self.cols = cols
        self.vals = vals
        for arr in (rows, cols, vals):
            arr.setflags(write=False)

    @classmethod
    def _wrap(cls, n_rows: int, n_cols: int, rows, cols, vals) -> "SparseMatrix":
        # Fast path for internally produced data that is already canonical
        # (sorted column-major, coalesced, no stored zeros, in range).
        m = object.__new__(cls)
        m.n_rows = int(n_rows)
        m.n_cols = int(n_cols)
        m.rows = np.ascontiguousarray(rows, dtype=np.int64)
        m.cols = np.ascontiguousarray(cols, dtype=np.int64)
        m.vals = np.ascontiguousarray(vals, dtype=np.float64)
        for arr in (m.rows, m.cols, m.vals):
            arr.setflags(write=False)
        return m

    @classmethod
    def from_entries(cls, n_rows: int, n_cols: int,
                     entries: Iterable[tuple[int, int, float]]) -> "SparseMatrix":
        triples = list(entries)
        if not triples:
            return cls(n_rows, n_cols)
        r, c, v = zip(*triples)
        return cls(n_rows, n_cols, r, c, v)

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        idx = np.arange(n, dtype=np.int64)
        return cls._wrap(n, n, idx, idx, np.ones(n))

    @classmethod
    def from_dense(cls, arr) -> "SparseMatrix":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("expected a 2-d array")
        cols, rows = np.nonzero(arr.T)  # column-major scan
        return cls._wrap(arr.shape[0], arr.shape[1],
                         rows.astype(np.int64), cols.astype(np.int64),
                         arr[rows, cols])

    @classmethod
    def from_scipy(cls, mat) -> "SparseMatrix":
        c = mat.tocsc().copy()
        c.sort_indices()
        c.eliminate_zeros()
        return cls._from_csc(c)

    @classmethod
    def _from_csc(cls, c) -> "SparseMatrix":
        # Caller guarantees sorted indices and no stored zeros.
        counts = np.diff(c.indptr)
        cols = np.repeat(np.arange(c.shape[1], dtype=np.int64), counts)
        return cls._wrap(c.shape[0], c.shape[1],
                         c.indices.astype(np.int64, copy=False), cols, c.data)

    def to_csc(self) -> sp.csc_matrix:
        c = sp.csc_matrix((self.vals, (self.rows, self.cols)),
                          shape=(self.n_rows, self.n_cols))
        c.sort_indices()
        return c

    def to_csr(self) -> sp.csr_matrix:
        r = sp.csr_matrix((self.vals, (self.rows, self.cols)),
                          shape=(self.n_rows, self.n_cols))
        r.sort_indices()
        return r

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols))
        out[self.rows, self.cols] = self.vals
        return out

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist()))

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.vals, minlength=self.n_rows)

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.cols, weights=self.vals, minlength=self.n_cols)

    def get(self, i: int, j: int) -> float:
        lo = np.searchsorted(self.cols, j, side="left")
        hi = np.searchsorted(self.cols, j, side="right")
        k = lo + np.searchsorted(self.rows[lo:hi], i, side="left")
        if k < hi and self.rows[k] == i:
            return float(self.vals[k])
        return 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (self.n_rows == other.n_rows and self.n_cols == other.n_cols
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols)
                and np.array_equal(self.vals, other.vals))

    __hash__ = None

    def __iter__(self) -> Iterator[tuple[int, int, float]]:
        return iter(self.entries)

    def __repr__(self) -> str:
        return f"SparseMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


class NodeSet:
    """Sorted set of node indices inside a fixed universe [0, universe_size)."""

    __slots__ = ("members", "universe_size")

    def __init__(self, members, universe_size: int):
        arr = np.unique(np.asarray(members, dtype=np.int64))
        if universe_size < 0:
            raise ValueError("universe size must be non-negative")
        if arr.size and (arr[0] < 0 or arr[-1] >= universe_size):
            raise ValueError("node index outside the universe")
        self.members = arr
        self.universe_size = int(universe_size)
        arr.setflags(write=False)

    @classmethod
    def full(cls, n: int) -> "NodeSet":
        return cls(np.arange(n, dtype=np.int64), n)

    @classmethod
    def empty(cls, n: int) -> "NodeSet":
        return cls(np.empty(0, dtype=np.int64), n)

    def complement(self) -> "NodeSet":
        mask = np.ones(self.universe_size, dtype=bool)
        mask[self.members] = False
        return NodeSet(np.flatnonzero(mask), self.universe_size)

    def positions_of(self, indices: np.ndarray) -> np.ndarray:
        """Map global indices to positions in `members`; -1 for non-members."""
        if self.members.size == 0:
            return np.full(np.asarray(indices).shape, -1, dtype=np.int64)
        idx = np.searchsorted(self.members, indices)
        idx_c = np.minimum(idx, len(self.members) - 1)
        return np.where(self.members[idx_c] == indices, idx_c, -1)

    def __len__(self) -> int:
        return int(self.members.size)

    def __contains__(self, node: int) -> bool:
        i = np.searchsorted(self.members, node)
        return i < self.members.size and self.members[i] == node

    def __iter__(self):
        return iter(self.members.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, NodeSet):
            return NotImplemented
        return (self.universe_size == other.universe_size
                and np.array_equal(self.members, other.members))

    __hash__ = None

    def __repr__(self) -> str:
        return f"NodeSet({len(self)}/{self.universe_size})"


def transpose(m: SparseMatrix) -> SparseMatrix:
    """Swap rows and columns; canonical order is restored without sorting
    because the CSR form of m is the CSC form of its transpose."""
    r = m.to_csr()
    counts = np.diff(r.indptr)
    new_cols = np.repeat(np.arange(m.n_rows, dtype=np.int64), counts)
    return SparseMatrix._wrap(m.n_cols, m.n_rows,
                              r.indices.astype(np.int64, copy=False),
                              new_cols, r.data)


def spmm(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    """Exact sparse product a @ b; entries below CANCEL_EPS are dropped."""
    if a.n_cols != b.n_rows:
        raise ValueError(
            f"dimension mismatch: {a.n_rows}x{a.n_cols} @ {b.n_rows}x{b.n_cols}")
    c = (a.to_csr() @ b.to_csr()).tocsc()
    c.sort_indices()
    c.data[np.abs(c.data) < CANCEL_EPS] = 0.0
    c.eliminate_zeros()
    return SparseMatrix._from_csc(c)


def row_normalize(a: SparseMatrix) -> SparseMatrix:
    """Scale each row to sum 1. Raises on empty rows (missing self-loops)."""
    counts = np.bincount(a.rows, minlength=a.n_rows)
    if a.n_rows and counts.min() == 0:
        empty = int(np.argmin(counts))
        raise ValueError(
            f"row {empty} has no entries; the matrix is not self-looped")
    sums = a.row_sums()
    if np.any(sums <= 0.0):
        raise ValueError("row sums must be positive to normalize")
    return SparseMatrix._wrap(a.n_rows, a.n_cols, a.rows, a.cols,
                              a.vals / sums[a.rows])


def column_normalize(a: SparseMatrix) -> SparseMatrix:
    """Scale each non-empty column to sum 1; empty columns stay empty."""
    sums = a.col_sums()
    if a.vals.size and np.any(sums[a.cols] <= 0.0):
        raise ValueError("non-empty column sums must be positive to normalize")
    return SparseMatrix._wrap(a.n_rows, a.n_cols, a.rows, a.cols,
                              a.vals / sums[a.cols])


def extract_block(a: SparseMatrix, rows: NodeSet, cols: NodeSet) -> SparseMatrix:
    """Submatrix on the given row/column sets, reindexed to local coordinates."""
    if rows.universe_size != a.n_rows or cols.universe_size != a.n_cols:
        raise ValueError("node set universes must match the matrix shape")
    rpos = rows.positions_of(a.rows)
    cpos = cols.positions_of(a.cols)
    keep = (rpos >= 0) & (cpos >= 0)
    # Reindexing is monotone, so canonical order is preserved.
    return SparseMatrix._wrap(len(rows), len(cols), rpos[keep], cpos[keep],
                              a.vals[keep])


MTX_HEADER = "%%MatrixMarket matrix coordinate real general"


def write_mtx(m: SparseMatrix, path) -> None:
    """Matrix Market coordinate format, 1-indexed, 17 significant digits."""
    with open(path, "w") as fh:
        fh.write(MTX_HEADER + "\n")
        fh.write(f"{m.n_rows} {m.n_cols} {m.nnz}\n")
        fh.writelines(
            f"{r + 1} {c + 1} {v:.17g}\n"
            for r, c, v in zip(m.rows.tolist(), m.cols.tolist(), m.vals.tolist()))


def read_mtx(path) -> SparseMatrix:
    with open(path) as fh:
        header = fh.readline().strip()
        tokens = header.lower().split()
        if tokens[:5] != ["%%matrixmarket", "matrix", "coordinate", "real", "general"]:
            raise ValueError(f"unsupported Matrix Market header: {header!r}")
        line = fh.readline()
        while line.startswith("%"):
            line = fh.readline()
        n_rows, n_cols, nnz = (int(x) for x in line.split())
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        k = 0
        for line in fh:
            line = line.strip()
            if not line or line.startswith("%"):
                continue
            r, c, v = line.split()
            rows[k], cols[k], vals[k] = int(r) - 1, int(c) - 1, float(v)
            k += 1
        if k != nnz:
            raise ValueError(f"expected {nnz} entries, found {k}")
    return SparseMatrix(n_rows, n_cols, rows, cols, vals)


def write_tsv(m: SparseMatrix, path) -> None:
    """0-indexed row<TAB>col<TAB>value triples, with a shape comment so the
    round trip preserves trailing empty rows/columns."""
    with open(path, "w") as fh:
        fh.write(f"# shape: {m.n_rows} {m.n_cols}\n")
        fh.writelines(
            f"{r}\t{c}\t{v:.17g}\n"
            for r, c, v in zip(m.rows.tolist(), m.cols.tolist(), m.vals.tolist()))


def read_tsv(path, n_rows: int | None = None, n_cols: int | None = None) -> SparseMatrix:
    rows, cols, vals = [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                tokens = line[1:].split()
                if tokens[:1] == ["shape:"] and len(tokens) == 3:
                    n_rows = n_rows if n_rows is not None else int(tokens[1])
                    n_cols = n_cols if n_cols is not None else int(tokens[2])
                continue
            r, c, v = line.split("\t")
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
    if n_rows is None:
        n_rows = max(rows, default=-1) + 1
    if n_cols is None:
        n_cols = max(cols, default=-1) + 1
    return SparseMatrix(n_rows, n_cols, rows, cols, vals)
