#!/usr/bin/env python3
"""Run every validation suite once and print a PASS/FAIL line per check.

    python scripts/run_acceptance.py --out report.json

Per-suite wall times are printed too, so the time budgets can be compared
on the current machine.  The exit status is 0 only if every check passed.
"""

import argparse
import sys
import time

from elliptic_dyson.harness import SUITES, RunConfig, run_suite


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=lambda s: int(s, 0), default=42)
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--pinning-paths", type=int, default=10_000)
    ap.add_argument("--out", default=None, help="write the combined JSON report here")
    args = ap.parse_args()

    failures = 0
    for name in (s for s in SUITES if s != "all"):
        cfg = RunConfig(suite=name, seed=args.seed, n_paths=args.paths, pinning_paths=args.pinning_paths)
        start = time.perf_counter()
        report = run_suite(cfg)
        elapsed = time.perf_counter() - start
        print(f"== {name} ({elapsed:.1f}s)")
        for rec in report.records:
            print(f"  {'PASS' if rec.passed else 'FAIL'} {rec.name}  measured={rec.measured:.4g} tol={rec.tolerance:.3g}")
            failures += not rec.passed
    if args.out:
        cfg = RunConfig(suite="all", seed=args.seed, n_paths=args.paths, pinning_paths=args.pinning_paths, out=args.out)
        run_suite(cfg)
    return 0 if failures == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
