"""Command-line interface: augment, verify, stats and bench subcommands.

Exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 input/output error.
"""

from __future__ import annotations

import os

# Best-effort parallelism cap: honored if numpy has not been imported yet
# in this process (true for console-script and `python -m` entry).
if "TIARA_THREADS" in os.environ:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["TIARA_THREADS"])

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .diffusion import (DiffusionConfig, DiffusionState,
                        power_iterate_raw, power_iteration_error_bound, run,
                        step)
from .ingest import (ParseError, SnapshotSequence, bin_snapshots,
                     load_edge_list, sequence_from_pairs)
from .oracle import (MAX_DENSE, closed_form, exact_recurrence, monte_carlo_trwr,
                     row_normalized_dense, total_variation)
from .sparse import SparseMatrix, row_normalize, write_mtx, write_tsv

OK, VERIFY_FAILED, USAGE_ERROR, IO_ERROR = 0, 1, 2, 3


def synthetic_sequence(n: int, active: int, steps: int,
                       avg_degree: float = 2.2, seed: int = 0) -> SnapshotSequence:
    """Random snapshot sequence with a controlled number of active nodes per
    step: a ring over the chosen nodes (so all of them are incident to an
    edge) plus random extra pairs up to the requested edge/node ratio."""
    rng = np.random.default_rng(seed)
    per_step = []
    for _ in range(steps):
        act = rng.choice(n, size=active, replace=False)
        perm = rng.permutation(act)
        pairs = list(zip(perm.tolist(), np.roll(perm, -1).tolist()))
        extra = max(0, int(round(avg_degree * active)) - active)
        if extra:
            us = rng.choice(act, extra)
            vs = rng.choice(act, extra)
            pairs.extend((int(u), int(v)) for u, v in zip(us, vs) if u != v)
        per_step.append(pairs)
    return sequence_from_pairs(n, per_step)


def _random_dtdg(rng, max_n: int, max_steps: int) -> SnapshotSequence:
    n = int(rng.integers(4, max_n + 1))
    steps = int(rng.integers(1, max_steps + 1))
    per_step = []
    for _ in range(steps):
        m = int(rng.integers(0, max(2, 2 * n)))
        us = rng.integers(0, n, m)
        vs = rng.integers(0, n, m)
        per_step.append([(int(u), int(v)) for u, v in zip(us, vs) if u != v])
    return sequence_from_pairs(n, per_step)


def _config_from(args, **overrides) -> DiffusionConfig:
    base = dict(alpha=args.alpha, beta=args.beta, iterations=args.iterations,
                epsilon=args.epsilon)
    base.update(overrides)
    return DiffusionConfig(**base)


def _offdiag_nnz(a: SparseMatrix) -> int:
    return int(np.count_nonzero(a.rows != a.cols))


def _write_manifest(path, config: dict, seq: SnapshotSequence, records,
                    total_ms: float, outputs=None) -> None:
    manifest = {
        "tool": "tiara",
        "version": __version__,
        "config": config,
        "input": {"nodes": seq.n,
                  "edges": int(sum(_offdiag_nnz(a) for a in seq.snapshots)),
                  "steps": seq.T},
        "per_step": records,
        "total_wall_ms": total_ms,
        "total_nnz": int(sum(r["output_nnz"] for r in records)),
    }
    if outputs is not None:
        manifest["outputs"] = outputs
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_augment(args) -> int:
    edges = load_edge_list(args.input, src_col=args.src_col,
                           dst_col=args.dst_col, time_col=args.time_col)
    seq = bin_snapshots(edges, args.time_aggregation,
                        undirected=args.undirected, sum_weights=args.sum_weights)
    cfg = _config_from(args, symmetric_trick=args.symmetric_trick,
                       drop_weights=args.drop_weights,
                       transpose_output=not args.no_transpose,
                       converge_tol=args.converge_tol)
    os.makedirs(args.output_dir, exist_ok=True)
    writer = write_mtx if args.format == "mtx" else write_tsv

    records = []
    outputs = []
    state = DiffusionState.initial(seq.n)
    started = time.perf_counter()
    for i, (a_t, act) in enumerate(zip(seq.snapshots, seq.activated)):
        t0 = time.perf_counter()
        out, state = step(a_t, act, state, cfg)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        name = f"x_{i + 1:04d}.{args.format}"
        writer(out, os.path.join(args.output_dir, name))
        outputs.append(name)
        records.append({"t": i + 1, "active_nodes": len(act),
                        "snapshot_edges": _offdiag_nnz(a_t),
                        "output_nnz": out.nnz,
                        "wall_ms": round(wall_ms, 3)})
    total_ms = (time.perf_counter() - started) * 1000.0

    config_echo = {k: getattr(args, k) for k in
                   ("input", "output_dir", "format", "alpha", "beta",
                    "iterations", "epsilon", "time_aggregation", "undirected",
                    "sum_weights", "symmetric_trick", "drop_weights",
                    "no_transpose", "converge_tol", "seed", "src_col",
                    "dst_col", "time_col")}
    config_echo["threads"] = os.environ.get("TIARA_THREADS")
    _write_manifest(os.path.join(args.output_dir, "manifest.json"),
                    config_echo, seq, records, round(total_ms, 3), outputs)
    print(f"wrote {seq.T} matrices and manifest.json to {args.output_dir}")
    return OK


def cmd_stats(args) -> int:
    edges = load_edge_list(args.input, src_col=args.src_col,
                           dst_col=args.dst_col, time_col=args.time_col)
    seq = bin_snapshots(edges, args.time_aggregation,
                        undirected=args.undirected, sum_weights=args.sum_weights)
    m_total = sum(_offdiag_nnz(a) for a in seq.snapshots)
    n_t_avg = float(np.mean([len(a) for a in seq.activated]))
    c_t = (m_total / seq.T) / n_t_avg if n_t_avg > 0 else 0.0
    print("n\tm\tT\tL\tavg_n_t\tC_t")
    print(f"{seq.n}\t{m_total}\t{seq.T}\t-\t{int(n_t_avg)}\t{c_t:.2f}")
    return OK


def cmd_bench(args) -> int:
    if args.input:
        edges = load_edge_list(args.input, src_col=args.src_col,
                               dst_col=args.dst_col, time_col=args.time_col)
        seq = bin_snapshots(edges, args.time_aggregation,
                            undirected=args.undirected,
                            sum_weights=args.sum_weights)
    else:
        seq = synthetic_sequence(args.nodes, args.active, args.steps,
                                 avg_degree=args.avg_degree, seed=args.seed)
    cfg = _config_from(args)

    records = []
    state = DiffusionState.initial(seq.n)
    started = time.perf_counter()
    for i, (a_t, act) in enumerate(zip(seq.snapshots, seq.activated)):
        t0 = time.perf_counter()
        out, state = step(a_t, act, state, cfg)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        records.append({"t": i + 1, "active_nodes": len(act),
                        "snapshot_edges": _offdiag_nnz(a_t),
                        "output_nnz": out.nnz,
                        "wall_ms": round(wall_ms, 3)})
        print(f"t={i + 1:4d}  n_t={len(act):6d}  nnz={out.nnz:10d}  "
              f"{wall_ms:9.1f} ms")
    total_ms = (time.perf_counter() - started) * 1000.0
    peak = max(r["output_nnz"] for r in records)
    print(f"total {total_ms / 1000.0:.2f} s over {seq.T} steps, "
          f"peak output nnz {peak}")

    config_echo = {k: getattr(args, k) for k in
                   ("alpha", "beta", "iterations", "epsilon", "seed")}
    config_echo.update(input=args.input, nodes=seq.n)
    _write_manifest(args.manifest, config_echo, seq, records, round(total_ms, 3))
    print(f"manifest written to {args.manifest}")
    return OK


def _check_stochastic(args) -> tuple[bool, str]:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for trial in range(args.trials):
        seq = _random_dtdg(rng, args.nodes, args.steps)
        alpha = float(rng.uniform(0.05, 0.6))
        beta = float(rng.uniform(0.0, 0.95 - alpha))
        cfg = DiffusionConfig(alpha=alpha, beta=beta,
                              iterations=int(rng.integers(2, 20)),
                              epsilon=(0.0 if trial % 2 else 1e-3),
                              transpose_output=False)
        for x in run(seq, cfg):
            sums = x.col_sums()
            nonempty = np.bincount(x.cols, minlength=x.n_cols) > 0
            if nonempty.any():
                worst = max(worst, float(np.abs(sums[nonempty] - 1.0).max()))
    return worst <= 1e-9, f"max |column sum - 1| = {worst:.3e} (tol 1e-9)"


def _check_closed_form(args) -> tuple[bool, str]:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.trials):
        seq = _random_dtdg(rng, min(args.nodes, 50), min(args.steps, 6))
        alpha = float(rng.uniform(0.05, 0.6))
        beta = float(rng.uniform(0.01, 0.9 - alpha))
        t = seq.T
        gap = np.abs(exact_recurrence(seq, alpha, beta, t)
                     - closed_form(seq, alpha, beta, t)).max()
        worst = max(worst, float(gap))
    return worst <= 1e-10, f"max |recurrence - closed form| = {worst:.3e} (tol 1e-10)"


def _check_power_bound(args) -> tuple[bool, str]:
    rng = np.random.default_rng(args.seed)
    seq = _random_dtdg(rng, args.nodes, 1)
    a_norm = row_normalize(seq.snapshots[0])
    c = 1.0 - args.alpha - args.beta
    exact = np.linalg.solve(np.eye(seq.n) - c * a_norm.to_dense().T,
                            np.eye(seq.n))
    # Test hook: lets the suite verify that a silent iteration shortfall is
    # caught as a bound violation.
    fault = os.environ.get("TIARA_FAULT_ITERATIONS")
    lines = []
    ok = True
    for k in sorted({5, 10, args.iterations}):
        executed = int(fault) if fault else k
        m = power_iterate_raw(a_norm, c, executed)
        measured = float(np.abs(m - exact).sum(axis=0).max())
        bound = power_iteration_error_bound(c, k) + 1e-12
        ok &= measured <= bound
        lines.append(f"K={k}: measured {measured:.3e} vs bound {bound:.3e}")
    return ok, "; ".join(lines)


def _check_nnz_bound(args) -> tuple[bool, str]:
    rng = np.random.default_rng(args.seed)
    ok = True
    detail = []
    for epsilon in (1e-2, 1e-3):
        cap = int(np.floor(1.0 / epsilon))
        worst_col = 0
        worst_total_ratio = 0.0
        for _ in range(max(2, args.trials // 2)):
            seq = _random_dtdg(rng, args.nodes, args.steps)
            cfg = DiffusionConfig(alpha=0.2, beta=0.3, iterations=10,
                                  epsilon=epsilon, transpose_output=False)
            for x in run(seq, cfg):
                col_nnz = np.bincount(x.cols, minlength=x.n_cols)
                worst_col = max(worst_col, int(col_nnz.max()))
                worst_total_ratio = max(worst_total_ratio,
                                        x.nnz / (x.n_cols / epsilon))
        ok &= worst_col <= cap and worst_total_ratio <= 1.0
        detail.append(f"eps={epsilon:g}: max column nnz {worst_col} (cap {cap}), "
                      f"total nnz at {worst_total_ratio:.2%} of n/eps")
    return ok, "; ".join(detail)


def _check_identity_block(args) -> tuple[bool, str]:
    rng = np.random.default_rng(args.seed)
    ok = True
    for _ in range(args.trials):
        n = int(rng.integers(8, args.nodes + 1))
        core = max(2, n // 2)  # nodes >= core never activate
        per_step = []
        for _ in range(int(rng.integers(1, args.steps + 1))):
            m = int(rng.integers(1, 2 * core))
            us = rng.integers(0, core, m)
            vs = rng.integers(0, core, m)
            per_step.append([(int(u), int(v)) for u, v in zip(us, vs) if u != v])
        seq = sequence_from_pairs(n, per_step)
        cfg = DiffusionConfig(alpha=0.3, beta=0.2, iterations=8, epsilon=1e-3,
                              transpose_output=False)
        for x in run(seq, cfg):
            touched = (x.rows >= core) | (x.cols >= core)
            idle = x.rows[touched], x.cols[touched], x.vals[touched]
            ok &= bool(np.all(idle[0] == idle[1]) and np.all(idle[2] == 1.0))
    return ok, "never-activated rows and columns stay exactly identity"


def _check_ppr_limit(args) -> tuple[bool, str]:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(max(2, args.trials // 2)):
        seq = _random_dtdg(rng, min(args.nodes, 100), min(args.steps, 3))
        alpha = float(rng.uniform(0.15, 0.5))
        cfg = DiffusionConfig(alpha=alpha, beta=0.0, iterations=200,
                              epsilon=0.0, transpose_output=False)
        for a_t, x in zip(seq.snapshots, run(seq, cfg)):
            a_norm = row_normalized_dense(a_t)
            ppr = alpha * np.linalg.inv(np.eye(seq.n) - (1 - alpha) * a_norm.T)
            worst = max(worst, float(np.abs(x.to_dense() - ppr).max()))
    return worst <= 1e-8, f"max gap to static restart-walk kernel = {worst:.3e} (tol 1e-8)"


def _check_monte_carlo(args) -> tuple[bool, str]:
    seq = synthetic_sequence(20, 8, 3, avg_degree=2.0, seed=args.seed)
    exact = exact_recurrence(seq, 0.2, 0.3, 3)
    est = monte_carlo_trwr(seq, 0, 0.2, 0.3, 3, walks=args.walks,
                           rng_seed=args.seed)
    tv = total_variation(est, exact[:, 0])
    return tv <= 0.02, f"TV distance {tv:.4f} at {args.walks} walks (tol 0.02)"


CHECKS = {
    "stochastic": _check_stochastic,
    "closed-form": _check_closed_form,
    "power-bound": _check_power_bound,
    "nnz-bound": _check_nnz_bound,
    "identity-block": _check_identity_block,
    "ppr-limit": _check_ppr_limit,
    "monte-carlo": _check_monte_carlo,
}


def cmd_verify(args) -> int:
    if not 8 <= args.nodes <= MAX_DENSE:
        raise ValueError(f"verify needs --nodes between 8 and {MAX_DENSE}")
    names = list(CHECKS) if args.check == "all" else [args.check]
    failed = 0
    for name in names:
        ok, detail = CHECKS[name](args)
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failed += 0 if ok else 1
    return OK if failed == 0 else VERIFY_FAILED


def _add_parse_flags(p) -> None:
    p.add_argument("--time-aggregation", type=int, default=1_200_000,
                   help="bin width in seconds (default 1200000)")
    p.add_argument("--undirected", action="store_true",
                   help="mirror every edge before adding self-loops")
    p.add_argument("--sum-weights", action="store_true",
                   help="sum duplicate edges in a bin instead of collapsing to 1")
    p.add_argument("--src-col", type=int, default=0)
    p.add_argument("--dst-col", type=int, default=1)
    p.add_argument("--time-col", type=int, default=-1,
                   help="timestamp column (default: last field)")


def _add_diffusion_flags(p) -> None:
    p.add_argument("--alpha", type=float, default=0.25,
                   help="restart probability (default 0.25)")
    p.add_argument("--beta", type=float, default=0.25,
                   help="time-travel probability (default 0.25)")
    p.add_argument("--iterations", type=int, default=100,
                   help="power-iteration rounds (default 100)")
    p.add_argument("--epsilon", type=float, default=1e-3,
                   help="filtering threshold (default 1e-3)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiara",
        description="Time-aware random-walk diffusion matrices for dynamic "
                    "graph snapshots")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="write one augmented matrix per snapshot")
    p.add_argument("--input", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--format", choices=("mtx", "tsv"), default="mtx")
    _add_diffusion_flags(p)
    _add_parse_flags(p)
    p.add_argument("--symmetric-trick", action="store_true",
                   help="symmetrize, binarize and degree-normalize the output")
    p.add_argument("--drop-weights", action="store_true",
                   help="binarize the output")
    p.add_argument("--no-transpose", action="store_true",
                   help="emit the column-stochastic matrix itself")
    p.add_argument("--converge-tol", type=float, default=None,
                   help="optional early stop for the power iteration")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("verify", help="run randomized property checks")
    p.add_argument("--check", choices=["all", *CHECKS], default="all")
    _add_diffusion_flags(p)
    p.add_argument("--nodes", type=int, default=40)
    p.add_argument("--steps", type=int, default=4)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--walks", type=int, default=200_000)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stats", help="dataset summary after binning")
    p.add_argument("--input", required=True)
    _add_parse_flags(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="time the pipeline on a file or a "
                                     "synthetic sequence")
    p.add_argument("--input", default=None)
    _add_diffusion_flags(p)
    _add_parse_flags(p)
    p.add_argument("--nodes", type=int, default=1000)
    p.add_argument("--active", type=int, default=100)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--avg-degree", type=float, default=2.2)
    p.add_argument("--manifest", default="tiara-bench.json")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_ERROR
    except (ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
