"""Shared test helpers: random instances and brute-force oracles."""

import os

import numpy as np
import pytest

from tiara import SnapshotSequence, SparseMatrix, sequence_from_pairs


def random_sparse(rng, n_rows, n_cols, density=0.1, low=0.1, high=2.0):
    """Random matrix with values bounded away from the dust threshold."""
    mask = rng.random((n_rows, n_cols)) < density
    vals = rng.uniform(low, high, size=(n_rows, n_cols))
    return SparseMatrix.from_dense(np.where(mask, vals, 0.0))


def random_stochastic(rng, n, density=0.5):
    """Random column-stochastic matrix (every column non-empty)."""
    mask = rng.random((n, n)) < density
    np.fill_diagonal(mask, True)
    dense = np.where(mask, rng.uniform(0.05, 1.0, size=(n, n)), 0.0)
    return SparseMatrix.from_dense(dense / dense.sum(axis=0))


def random_dtdg(rng, n, steps, max_edges=None) -> SnapshotSequence:
    """Random snapshot sequence; some steps may have no edges at all."""
    if max_edges is None:
        max_edges = 2 * n
    per_step = []
    for _ in range(steps):
        m = int(rng.integers(0, max_edges + 1))
        us = rng.integers(0, n, m)
        vs = rng.integers(0, n, m)
        per_step.append([(int(u), int(v)) for u, v in zip(us, vs) if u != v])
    return sequence_from_pairs(n, per_step)


def dense_matmul_oracle(a: SparseMatrix, b: SparseMatrix) -> np.ndarray:
    """Brute-force triple-loop product on densified inputs."""
    da, db = a.to_dense(), b.to_dense()
    out = np.zeros((a.n_rows, b.n_cols))
    for i in range(a.n_rows):
        for j in range(b.n_cols):
            acc = 0.0
            for k in range(a.n_cols):
                acc += da[i, k] * db[k, j]
            out[i, j] = acc
    return out


def bitcoin_alpha_path():
    """Location of the public BitcoinAlpha edge file, when present."""
    candidates = [
        os.environ.get("TIARA_DATA_DIR"),
        os.path.join(os.path.dirname(__file__), "data"),
        os.path.join(os.path.dirname(__file__), "..", "data"),
    ]
    for base in candidates:
        if not base:
            continue
        for name in ("soc-sign-bitcoinalpha.csv", "soc-sign-bitcoin-alpha.csv"):
            path = os.path.join(base, name)
            if os.path.exists(path):
                return path
    return None


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
