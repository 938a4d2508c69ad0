"""Timestamped edge lists and their conversion to snapshot sequences.

Accepts SNAP-style whitespace- or comma-separated edge files with `#`
comments, remaps node IDs densely in first-appearance order, and bins edges
into fixed-width time windows anchored at the earliest timestamp. Every
snapshot carries self-loops on all nodes so it row-normalizes cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .sparse import NodeSet, SparseMatrix


class ParseError(ValueError):
    """Malformed edge-list input, pointing at the offending line."""

    def __init__(self, line_number: int | None, message: str):
        self.line_number = line_number
        if line_number is None:
            super().__init__(message)
        else:
            super().__init__(f"line {line_number}: {message}")


@dataclass(frozen=True, eq=False)
class TemporalEdgeList:
    """Raw timestamped edges with a dense node remapping."""

    src: np.ndarray
    dst: np.ndarray
    ts: np.ndarray
    node_count: int
    node_ids: tuple[str, ...]  # dense index -> original ID

    @property
    def n_edges(self) -> int:
        return int(self.src.size)


def parse_edge_list(lines: Iterable[str], src_col: int = 0, dst_col: int = 1,
                    time_col: int = -1) -> TemporalEdgeList:
    """Parse `src dst ... timestamp` records.

    Fields may be separated by whitespace or commas; `#` and `%` lines are
    comments. Column positions are configurable; extra fields (ratings and
    the like) are ignored. `time_col=-1` picks the last field, which covers
    both 3-column files and rating-bearing 4-column ones.
    """
    srcs: list[int] = []
    dsts: list[int] = []
    tss: list[int] = []
    index: dict[str, int] = {}
    ids: list[str] = []

    def node_id(token: str) -> int:
        i = index.get(token)
        if i is None:
            i = len(ids)
            index[token] = i
            ids.append(token)
        return i

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith(("#", "%")):
            continue
        fields = line.replace(",", " ").split()
        if len(fields) < 3:
            raise ParseError(lineno, f"expected at least 3 fields, got {len(fields)}")
        try:
            s_tok = fields[src_col]
            d_tok = fields[dst_col]
            t_tok = fields[time_col]
        except IndexError:
            raise ParseError(lineno, "configured column is out of range") from None
        try:
            ts = int(t_tok)
        except ValueError:
            try:
                ts = int(float(t_tok))
            except ValueError:
                raise ParseError(lineno, f"bad timestamp {t_tok!r}") from None
        if ts < 0:
            raise ParseError(lineno, f"negative timestamp {ts}")
        srcs.append(node_id(s_tok))
        dsts.append(node_id(d_tok))
        tss.append(ts)

    if not srcs:
        raise ParseError(None, "empty input: no edges found")
    return TemporalEdgeList(
        src=np.asarray(srcs, dtype=np.int64),
        dst=np.asarray(dsts, dtype=np.int64),
        ts=np.asarray(tss, dtype=np.int64),
        node_count=len(ids),
        node_ids=tuple(ids),
    )


def load_edge_list(path, **options) -> TemporalEdgeList:
    with open(path) as fh:
        return parse_edge_list(fh, **options)


def activated_nodes(a: SparseMatrix) -> NodeSet:
    """Nodes incident to at least one non-self-loop entry."""
    off = a.rows != a.cols
    return NodeSet(np.concatenate([a.rows[off], a.cols[off]]), a.n_rows)


@dataclass(frozen=True, eq=False)
class SnapshotSequence:
    """Ordered self-looped adjacency matrices over a shared node universe."""

    snapshots: tuple[SparseMatrix, ...]
    activated: tuple[NodeSet, ...]
    n: int

    def __post_init__(self):
        if len(self.snapshots) < 1:
            raise ValueError("a sequence needs at least one snapshot")
        if len(self.activated) != len(self.snapshots):
            raise ValueError("one activated set per snapshot required")
        for a in self.snapshots:
            if a.n_rows != self.n or a.n_cols != self.n:
                raise ValueError("all snapshots must be n x n")
            diag = np.count_nonzero(a.rows == a.cols)
            if diag != self.n:
                raise ValueError("every snapshot must carry all self-loops")

    @property
    def T(self) -> int:
        return len(self.snapshots)


def _snapshot_from_pairs(n: int, u: np.ndarray, v: np.ndarray,
                         undirected: bool, sum_weights: bool) -> SparseMatrix:
    keep = u != v  # raw self-edges coincide with the universal self-loops
    u, v = u[keep], v[keep]
    if undirected:
        u, v = np.concatenate([u, v]), np.concatenate([v, u])
    if not sum_weights and u.size:
        key = u * n + v
        uniq = np.unique(key)
        u, v = uniq // n, uniq % n
    diag = np.arange(n, dtype=np.int64)
    rows = np.concatenate([u, diag])
    cols = np.concatenate([v, diag])
    vals = np.ones(rows.size)
    return SparseMatrix(n, n, rows, cols, vals)


def bin_snapshots(edges: TemporalEdgeList, time_aggregation: int,
                  undirected: bool = False,
                  sum_weights: bool = False) -> SnapshotSequence:
    """Distribute edges into windows of `time_aggregation` seconds.

    Bin 0 is anchored at the earliest timestamp. Interior windows with no
    edges are kept as self-loop-only snapshots; there are no trailing empty
    windows by construction. Duplicate edges within a window collapse to
    weight 1 unless `sum_weights` is set.
    """
    if time_aggregation <= 0:
        raise ValueError("time_aggregation must be positive")
    bins = (edges.ts - edges.ts.min()) // int(time_aggregation)
    n_steps = int(bins.max()) + 1
    n = edges.node_count

    order = np.argsort(bins, kind="stable")
    sorted_bins = bins[order]
    src, dst = edges.src[order], edges.dst[order]
    bounds = np.searchsorted(sorted_bins, np.arange(n_steps + 1))

    snapshots = []
    activated = []
    for t in range(n_steps):
        lo, hi = bounds[t], bounds[t + 1]
        a = _snapshot_from_pairs(n, src[lo:hi], dst[lo:hi], undirected, sum_weights)
        snapshots.append(a)
        activated.append(activated_nodes(a))
    return SnapshotSequence(tuple(snapshots), tuple(activated), n)


def sequence_from_pairs(n: int, steps: Iterable[Iterable[tuple[int, int]]],
                        undirected: bool = False) -> SnapshotSequence:
    """Build a sequence directly from per-step (src, dst) pair lists."""
    snapshots = []
    activated = []
    for pairs in steps:
        pairs = list(pairs)
        if pairs:
            u = np.asarray([p[0] for p in pairs], dtype=np.int64)
            v = np.asarray([p[1] for p in pairs], dtype=np.int64)
        else:
            u = v = np.empty(0, dtype=np.int64)
        a = _snapshot_from_pairs(n, u, v, undirected, sum_weights=False)
        snapshots.append(a)
        activated.append(activated_nodes(a))
    return SnapshotSequence(tuple(snapshots), tuple(activated), n)


def _replace_snapshot(seq: SnapshotSequence, t: int, a: SparseMatrix) -> SnapshotSequence:
    snaps = list(seq.snapshots)
    acts = list(seq.activated)
    snaps[t] = a
    acts[t] = activated_nodes(a)
    return SnapshotSequence(tuple(snaps), tuple(acts), seq.n)


def _check_edit(seq: SnapshotSequence, t: int, u: int, v: int) -> None:
    if not 0 <= t < seq.T:
        raise IndexError(f"snapshot index {t} out of range [0, {seq.T})")
    if not (0 <= u < seq.n and 0 <= v < seq.n):
        raise IndexError("node index out of range")


def insert_edge(seq: SnapshotSequence, t: int, u: int, v: int) -> SnapshotSequence:
    """Mark (u, v) present at step t; returns a new sequence."""
    _check_edit(seq, t, u, v)
    a = seq.snapshots[t]
    if a.get(u, v) != 0.0:
        return SnapshotSequence(seq.snapshots, seq.activated, seq.n)
    b = SparseMatrix(seq.n, seq.n,
                     np.append(a.rows, u), np.append(a.cols, v),
                     np.append(a.vals, 1.0))
    return _replace_snapshot(seq, t, b)


def delete_edge(seq: SnapshotSequence, t: int, u: int, v: int) -> SnapshotSequence:
    """Mark (u, v) absent at step t; self-loops cannot be removed."""
    _check_edit(seq, t, u, v)
    if u == v:
        raise ValueError("self-loops are structural and cannot be deleted")
    a = seq.snapshots[t]
    keep = ~((a.rows == u) & (a.cols == v))
    if keep.all():
        return SnapshotSequence(seq.snapshots, seq.activated, seq.n)
    b = SparseMatrix._wrap(seq.n, seq.n, a.rows[keep], a.cols[keep], a.vals[keep])
    return _replace_snapshot(seq, t, b)
