"""Command-line surface: solve, speedup sweep, property verification, datasets.

The process is a thin shell over library calls; every run writes a JSON
sidecar holding the full configuration, the problem hash and the derived
constants (L, kappa, delta), so any result can be reproduced from the
sidecar alone.  Exit codes are a stable contract: 0 success, 1 property
failure, 2 usage error, 3 solver runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .asynchronous import AsyncConfig, measure_speedup, run_async, speedup_table_csv
from .data import (
    parse_libsvm,
    load_partition_file,
    single_block_partition,
    singleton_partition,
    to_libsvm,
)
from .diagnostics import default_cache_dir, problem_hash, reference_optimum
from .fista import run_fista
from .losses import LOGISTIC, SQUARED, Loss, lipschitz_constant
from .penalties import BoxPenalty, GroupL2Penalty, L1Penalty, ZeroPenalty
from .problems import gen_disjoint_glm, gen_regularization, gen_sparse_glm
from .saga import SolverConfig, run_dense, run_sequential
from .verify import run_checks

EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_USAGE = 2
EXIT_SOLVER_ERROR = 3


class UsageError(ValueError):
    pass


def _parse_synthetic(spec):
    parts = spec.split(",")
    if len(parts) != 4:
        raise UsageError("--synthetic expects n,p,density,seed")
    try:
        n, p, seed = int(parts[0]), int(parts[1]), int(parts[3])
        density = float(parts[2])
    except ValueError as exc:
        raise UsageError(f"bad --synthetic value {spec!r}: {exc}") from None
    return n, p, density, seed


def _load_dataset(args):
    if args.data is not None and args.synthetic is not None:
        raise UsageError("--data and --synthetic are mutually exclusive")
    if args.data is not None:
        return parse_libsvm(args.data)
    if args.synthetic is not None:
        n, p, density, seed = _parse_synthetic(args.synthetic)
        return gen_sparse_glm(n, p, density, seed, loss_kind=args.loss)
    raise UsageError("one of --data or --synthetic is required")


def _make_partition(blocks_spec, p):
    if blocks_spec == "singleton":
        return singleton_partition(p)
    if blocks_spec == "single":
        return single_block_partition(p)
    path = blocks_spec.removeprefix("file:").removeprefix("file=")
    if not Path(path).exists():
        raise UsageError(f"partition file {path!r} not found")
    return load_partition_file(path, p)


def _resolve_lambda1(value, data):
    if value == "auto":
        return 1.0 / data.n_samples
    try:
        out = float(value)
    except ValueError:
        raise UsageError(f"--lambda1 must be a float or 'auto', got {value!r}") from None
    if out < 0:
        raise UsageError("--lambda1 must be nonnegative")
    return out


def _resolve_lambda2(value, data, partition, lam1, loss_kind):
    """Either an explicit float or auto-nnz=F (bisection on solution density)."""
    if value.startswith("auto-nnz="):
        try:
            target = float(value.removeprefix("auto-nnz="))
        except ValueError:
            raise UsageError(f"bad --lambda2 value {value!r}") from None
        if not 0 < target <= 1:
            raise UsageError("auto-nnz fraction must be in (0, 1]")

        def solve(l1, l2):
            cfg = SolverConfig(step_size="1/5L", epochs=100, seed=0)
            trace = run_sequential(data, Loss(loss_kind, l1), L1Penalty(l2),
                                   partition, cfg)
            return trace.final_x

        _, lam2 = gen_regularization(data, target, solve)
        return lam2
    try:
        out = float(value)
    except ValueError:
        raise UsageError(f"--lambda2 must be a float or 'auto-nnz=F', got {value!r}") from None
    if out < 0:
        raise UsageError("--lambda2 must be nonnegative")
    return out


def _make_penalty(args, data, partition, lam1):
    if args.penalty == "none":
        return ZeroPenalty()
    if args.penalty == "box":
        return BoxPenalty(args.box_lo, args.box_hi)
    lam2 = _resolve_lambda2(args.lambda2, data, partition, lam1, args.loss)
    if args.penalty == "l1":
        return L1Penalty(lam2)
    return GroupL2Penalty(lam2)


def _parse_step(value):
    try:
        return float(value)
    except ValueError:
        return value


def _setup_problem(args):
    data = _load_dataset(args)
    partition = _make_partition(args.blocks, data.n_features)
    lam1 = _resolve_lambda1(args.lambda1, data)
    loss = Loss(args.loss, lam1)
    penalty = _make_penalty(args, data, partition, lam1)
    return data, loss, penalty, partition


def _write_trace(trace, data, loss, penalty, partition, path):
    trace.meta["problem_hash"] = problem_hash(data, loss, penalty, partition)
    path = Path(path)
    trace.to_csv(path)
    trace.write_sidecar(path.with_suffix(path.suffix + ".json")
                        if path.suffix != ".csv" else path.with_suffix(".json"))


def cmd_solve(args):
    data, loss, penalty, partition = _setup_problem(args)
    step = _parse_step(args.step)
    if args.solver == "fista":
        trace = run_fista(data, loss, penalty, partition, max_iters=args.epochs)
    elif args.threads > 1:
        cfg = AsyncConfig(step_size=step, epochs=args.epochs, seed=args.seed,
                          threads=args.threads)
        trace = run_async(data, loss, penalty, partition, cfg)
    else:
        cfg = SolverConfig(step_size=step, epochs=args.epochs, seed=args.seed)
        runner = run_dense if args.solver == "dense" else run_sequential
        trace = runner(data, loss, penalty, partition, cfg)
    if args.trace_out:
        _write_trace(trace, data, loss, penalty, partition, args.trace_out)
    m = trace.meta
    print(f"algorithm={m['algorithm']} n={m['n_samples']} p={m['n_features']} "
          f"L={m['L']:.6g} delta={m['delta']:.6g}")
    print(f"final objective {trace.objective[-1]:.12e} after "
          f"{trace.iterations[-1]} iterations ({trace.wall_seconds[-1]:.3f} s)")
    return EXIT_OK


def cmd_speedup(args):
    data, loss, penalty, partition = _setup_problem(args)
    try:
        cores = [int(c) for c in args.cores.split(",")]
    except ValueError:
        raise UsageError(f"bad --cores value {args.cores!r}") from None
    info = lipschitz_constant(data, loss)
    ref = reference_optimum(data, loss, penalty, partition,
                            cache_dir=args.cache_dir,
                            solver="sparse" if data.n_samples > 500 else "dense",
                            residual_target=min(args.target * 1e-2, 1e-9))
    cfg = AsyncConfig(step_size=_parse_step(args.step), epochs=args.epochs,
                      seed=args.seed)
    rows, traces = measure_speedup(data, loss, penalty, partition, cfg, cores,
                                   args.target, ref["objective"])
    delta = traces[cores[0]].meta["delta"]
    kappa = info.L / loss.lambda1 if loss.lambda1 > 0 else float("inf")
    print(f"delta={delta:.6g} L={info.L:.6g} kappa={kappa:.6g} target={args.target:g}")
    print("cores,wall_speedup,theoretical_speedup,reached")
    for r in rows:
        print(f"{r['cores']},{r['wall_speedup']:.4f},{r['theoretical_speedup']:.4f},"
              f"{str(r['reached']).lower()}")
    if args.out:
        speedup_table_csv(rows, args.out)
    return EXIT_OK


def cmd_verify(args):
    try:
        reports = run_checks(only=args.only, cache_dir=args.cache_dir)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for r in reports:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"{status}  {r['name']:35} margin={r['margin']:+.3e}  {r['detail']}")
    if args.report:
        Path(args.report).write_text(json.dumps(reports, indent=2) + "\n")
    failed = [r for r in reports if not r["passed"]]
    print(f"{len(reports) - len(failed)}/{len(reports)} checks passed")
    return EXIT_PROPERTY_FAILURE if failed else EXIT_OK


def cmd_generate(args):
    if args.kind == "sparse":
        n, p, density, seed = _parse_synthetic(args.synthetic)
        data = gen_sparse_glm(n, p, density, seed, loss_kind=args.loss)
    else:
        if args.synthetic is None:
            raise UsageError("--synthetic is required")
        n, p, _, seed = _parse_synthetic(args.synthetic)
        data = gen_disjoint_glm(n, p, seed, loss_kind=args.loss)
    to_libsvm(data, args.out)
    print(f"wrote {data.n_samples} x {data.n_features} dataset "
          f"({data.features.nnz} nonzeros) to {args.out}")
    return EXIT_OK


def _add_problem_flags(sub):
    sub.add_argument("--data", help="LibSVM file (gzip by extension)")
    sub.add_argument("--synthetic", help="n,p,density,seed synthetic instance")
    sub.add_argument("--loss", choices=[LOGISTIC, SQUARED], default=LOGISTIC)
    sub.add_argument("--penalty", choices=["none", "l1", "group-l1", "box"],
                     default="l1")
    sub.add_argument("--lambda1", default="auto",
                     help="squared-l2 weight, float or 'auto' (= 1/n)")
    sub.add_argument("--lambda2", default="0.0",
                     help="penalty weight, float or 'auto-nnz=F' "
                          "(bisect to solution density F)")
    sub.add_argument("--box-lo", type=float, default=-1.0)
    sub.add_argument("--box-hi", type=float, default=1.0)
    sub.add_argument("--blocks", default="singleton",
                     help="'singleton', 'single', or a partition file path")
    sub.add_argument("--step", default="1/5L",
                     help="step size: float or 1/5L, 1/2L, 1/36L, 1/36nmu")
    sub.add_argument("--epochs", type=int, default=100)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--cache-dir", default=None,
                     help=f"optimum cache (default {default_cache_dir()})")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sparsesaga",
        description="Sparse proximal SAGA solvers for composite finite sums.")
    subs = parser.add_subparsers(dest="command", required=True)

    solve = subs.add_parser("solve", help="run one solver, write a trace")
    _add_problem_flags(solve)
    solve.add_argument("--solver", choices=["saga", "dense", "fista"],
                       default="saga")
    solve.add_argument("--threads", type=int, default=1,
                       help=">1 routes to the lock-free parallel solver")
    solve.add_argument("--trace-out", help="trace CSV path (JSON sidecar beside it)")
    solve.set_defaults(func=cmd_solve)

    speedup = subs.add_parser("speedup", help="speedup sweep over core counts")
    _add_problem_flags(speedup)
    speedup.add_argument("--cores", default="1,2,4",
                         help="comma-separated ascending list starting at 1")
    speedup.add_argument("--target", type=float, default=1e-6,
                         help="suboptimality level the sweep measures to")
    speedup.add_argument("--out", help="write the table as CSV")
    speedup.set_defaults(func=cmd_speedup)

    verify = subs.add_parser("verify", help="run the property-check suite")
    verify.add_argument("--only", help="run only checks whose name contains this")
    verify.add_argument("--report", help="write a JSON report")
    verify.add_argument("--cache-dir", default=None)
    verify.set_defaults(func=cmd_verify)

    generate = subs.add_parser("generate", help="write a synthetic LibSVM dataset")
    generate.add_argument("--kind", choices=["sparse", "disjoint"], default="sparse")
    generate.add_argument("--synthetic", required=True,
                          help="n,p,density,seed (density ignored for disjoint)")
    generate.add_argument("--loss", choices=[LOGISTIC, SQUARED], default=LOGISTIC)
    generate.add_argument("--out", required=True)
    generate.set_defaults(func=cmd_generate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, RuntimeError, OSError, np.linalg.LinAlgError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER_ERROR


if __name__ == "__main__":
    sys.exit(main(argv=sys.argv[1:]))
