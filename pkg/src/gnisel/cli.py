"""Command-line entry point: ``gnisel {generate,select,bench}``.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import fileio as io
from .baselines import RicParams, StarsParams, ebic_scores, select_ebic, select_ric, select_stars
from .core import sample_covariance, standardize
from .evalbench import child_seed, run_benchmark
from .glasso import GlassoError, glasso_path, lambda_grid
from .gni import select_gni
from .synthgen import GraphSpec, PrecisionParams, generate

logger = logging.getLogger("gnisel")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gnisel", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate a dataset and its true graph")
    g.add_argument("--kind", choices=("random", "hub"), required=True)
    g.add_argument("--p", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--edge-prob", type=float, default=None, help="default 3/p")
    g.add_argument("--hub-count", type=int, default=None, help="default ceil(p/20)")
    g.add_argument("--v", type=float, default=0.3, help="off-diagonal precision magnitude")
    g.add_argument("--u", type=float, default=0.1, help="diagonal augmentation")
    g.add_argument("--out-data", required=True)
    g.add_argument("--out-truth", required=True)

    s = sub.add_parser("select", help="select a graph for a data file")
    s.add_argument("--data", required=True)
    s.add_argument("--method", choices=("gni", "ebic", "stars", "ric"), required=True)
    s.add_argument("--nlambda", type=_positive_int, default=30)
    s.add_argument("--lambda-ratio", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--m", type=int, default=None, help="GNI sample count, default min(n^2, 10000)")
    s.add_argument("--gamma", type=float, default=0.5, help="EBIC gamma")
    s.add_argument("--beta", type=float, default=0.1, help="StARS instability threshold")
    s.add_argument("--subsamples", type=_positive_int, default=25)
    s.add_argument("--subsample-size", type=int, default=None)
    s.add_argument("--permutations", type=_positive_int, default=20, help="RIC permutations")
    s.add_argument("--out", required=True, help="selected adjacency matrix file")

    b = sub.add_parser("bench", help="run the model-selection benchmark")
    b.add_argument("--config", required=True)
    b.add_argument("--out-dir", required=True)
    b.add_argument("--jobs", type=_positive_int, default=None, help="overrides bench.jobs")
    return parser


def cmd_generate(args) -> int:
    try:
        spec = GraphSpec(args.kind, args.p, edge_prob=args.edge_prob, hub_count=args.hub_count,
                         seed=child_seed(args.seed, "graph"))
        params = PrecisionParams(args.v, args.u)
        if args.n < 2:
            raise ValueError("n must be at least 2")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    problem = generate(spec, args.n, child_seed(args.seed, "sample"), params)
    io.write_data(args.out_data, problem.data)
    io.write_adjacency(args.out_truth, problem.truth)
    print(f"kind={args.kind} p={args.p} n={args.n} edges={problem.truth.edge_count}")
    return EXIT_OK


def cmd_select(args) -> int:
    data = standardize(io.read_data(args.data))
    n, p = data.n, data.p
    t0 = time.perf_counter()
    if args.method == "ric":
        fit, graph = select_ric(data, RicParams(args.permutations, seed=args.seed))
        lam, score = fit.lam, fit.lam
    else:
        s = sample_covariance(data)
        grid = lambda_grid(s, args.nlambda, args.lambda_ratio)
        if args.method == "stars":
            try:
                params = StarsParams(args.beta, args.subsamples, args.subsample_size, args.seed)
                params.size_for(n)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            sel = select_stars(data, grid, params)
            idx, score = sel.index, sel.monotone_instability[sel.index]
            fit_path = glasso_path(s, grid.values[: idx + 1])
            graph = fit_path.adjacencies[idx]
            lam = sel.lam
        else:
            path = glasso_path(s, grid, n=n)
            if args.method == "gni":
                sel = select_gni(data, path, args.m, args.seed)
                idx, score = sel.index, sel.scores[sel.index].total
            else:
                if args.gamma < 0:
                    raise UsageError("gamma must be non-negative")
                idx = select_ebic(path, n, p, args.gamma)
                score = ebic_scores(path, n, p, args.gamma)[idx]
            graph, lam = path.adjacencies[idx], path.fits[idx].lam
    runtime = time.perf_counter() - t0
    io.write_adjacency(args.out, graph)
    print(f"method={args.method} lambda={io.format_float(lam)} edges={graph.edge_count} "
          f"score={io.format_float(float(score))} runtime_seconds={runtime:.3f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        config = io.read_config(args.config)
    except OSError as exc:
        print(f"gnisel: cannot read config: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except io.ConfigError as exc:
        raise UsageError(str(exc)) from None
    if args.jobs is not None:
        config = replace(config, jobs=args.jobs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = run_benchmark(config)
    io.atomic_write_text(out / "runs.csv", io.runs_table(result.records))
    io.atomic_write_text(out / "timings.csv", io.timings_table(result.records))
    io.atomic_write_text(out / "summary.csv", io.summary_table(result.summary()))
    io.atomic_write_text(out / "gni_f1.csv", io.gni_f1_table(result.gni_f1))
    ok = any(r.status == "ok" and r.criterion == "oracle" for r in result.records)
    failed = [r for r in result.records if r.status != "ok"]
    for r in failed:
        print(f"gnisel: {r.dataset_id} {r.criterion}: {r.status}", file=sys.stderr)
    print(f"datasets={len({r.dataset_id for r in result.records})} records={len(result.records)} "
          f"failures={len(failed)}")
    return EXIT_OK if ok else EXIT_RUNTIME


COMMANDS = {"generate": cmd_generate, "select": cmd_select, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"gnisel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GlassoError as exc:
        print(f"gnisel: solver failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        print(f"gnisel: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
