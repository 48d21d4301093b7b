"""Command-line entry point ``elliptic-dyson``.

``run`` executes a validation suite and writes a report; the exit status is
0 when every check passes, 1 when any fails and 2 for usage errors.
``eval-kernel`` writes the correlation kernel on a grid for plotting.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .harness import SUITES, RunConfig, default_positions, run_suite
from .kernels import KernelContext, corr_kernel
from .root_systems import FamilyTag
from .sde import THREADS_ENV, threads_from_env


def _family(text: str) -> str:
    try:
        return FamilyTag.parse(text).value
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown family {text!r}; expected one of A, B, Bvee, C, Cvee, BC, D")


def _families(text: str) -> tuple:
    return tuple(_family(part) for part in text.split(",") if part)


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError("expected a positive number")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elliptic-dyson", description="Elliptic Dyson models: validation and kernel evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a validation suite and write a report")
    run.add_argument("--suite", choices=sorted(SUITES), default="all")
    run.add_argument("--family", type=_families, default=(), help="family tag or comma-separated tags (default: each check's own set)")
    run.add_argument("--n", type=int, action="append", default=None, help="particle number; repeat to select several")
    run.add_argument("--tstar", type=_positive_float, default=1.0)
    run.add_argument("--r", type=_positive_float, default=1.0)
    run.add_argument("--seed", type=_u64, default=42)
    run.add_argument("--paths", type=int, default=100_000, help="Monte Carlo paths for the martingale and density checks")
    run.add_argument("--pinning-paths", type=int, default=10_000)
    run.add_argument("--dt", type=_positive_float, default=1e-4)
    run.add_argument("--threads", type=int, default=None, help=f"worker threads (capped by {THREADS_ENV})")
    run.add_argument("--out", default=None, help="report path (default: standard output)")
    run.add_argument("--format", choices=("csv", "json"), default="json")
    run.add_argument("--timings", action="store_true", help="include wall-clock times (reports are then not reproducible)")

    ev = sub.add_parser("eval-kernel", help="evaluate the correlation kernel on a grid")
    ev.add_argument("--family", type=_family, required=True)
    ev.add_argument("--n", type=int, default=2)
    ev.add_argument("--mode", choices=("elliptic", "trigonometric", "equilibrium"), default="elliptic")
    ev.add_argument("--u", default=None, help="comma-separated initial positions (default: evenly spread)")
    ev.add_argument("--s", type=float, default=0.3)
    ev.add_argument("--t", type=float, default=0.3)
    ev.add_argument("--tstar", type=_positive_float, default=1.0)
    ev.add_argument("--r", type=_positive_float, default=1.0)
    ev.add_argument("--grid", type=int, default=41, help="points per axis in (0, pi r)")
    ev.add_argument("--out", default=None)
    ev.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _workers(requested: int | None) -> int:
    cap = threads_from_env()
    if requested is None:
        return cap
    if requested < 1:
        raise ValueError("--threads must be positive")
    return min(requested, cap)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_run(args, parser) -> int:
    try:
        cfg = RunConfig(
            suite=args.suite,
            families=args.family,
            ns=tuple(args.n or ()),
            t_star=args.tstar,
            r=args.r,
            seed=args.seed,
            n_paths=args.paths,
            pinning_paths=args.pinning_paths,
            dt=args.dt,
            format=args.format,
            workers=_workers(args.threads),
            timings=args.timings,
        )
    except ValueError as exc:
        parser.error(str(exc))
    report = run_suite(cfg)
    _emit(report.render(), args.out)
    for rec in report.records:
        print(f"{'PASS' if rec.passed else 'FAIL'} {rec.name}", file=sys.stderr)
    return 0 if report.all_pass else 1


def _cmd_eval_kernel(args, parser) -> int:
    if args.grid < 2:
        parser.error("--grid needs at least 2 points")
    try:
        if args.u:
            u = tuple(float(v) for v in args.u.split(","))
        else:
            u = default_positions(args.family, args.n, args.r)
        if args.mode == "elliptic":
            ctx = KernelContext.elliptic(args.family, u, args.tstar, args.r)
        elif args.mode == "trigonometric":
            ctx = KernelContext.trigonometric(args.family, u, args.r)
        else:
            ctx = KernelContext.equilibrium(args.family, len(u), args.r)
        grid = (np.arange(args.grid) + 0.5) * math.pi * args.r / args.grid
        gx, gy = np.meshgrid(grid, grid, indexing="ij")
        values = np.asarray(corr_kernel(ctx, args.s, gx, args.t, gy), dtype=float)
    except ValueError as exc:
        parser.error(str(exc))
    if args.format == "json":
        payload = {
            "schema": 1,
            "family": args.family,
            "mode": args.mode,
            "u": list(u),
            "s": args.s,
            "t": args.t,
            "t_star": args.tstar,
            "r": args.r,
            "grid": grid.tolist(),
            "kernel": values.tolist(),
        }
        _emit(json.dumps(payload) + "\n", args.out)
    else:
        lines = ["x,y,kernel"]
        for i in range(grid.size):
            for j in range(grid.size):
                lines.append(f"{float(grid[i])!r},{float(grid[j])!r},{float(values[i, j])!r}")
        _emit("\n".join(lines) + "\n", args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args, parser)
    return _cmd_eval_kernel(args, parser)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
