#!/usr/bin/env python3
"""Write the equal-time density of several families on one grid as CSV, for plotting."""

import argparse
import math
import sys

import numpy as np

from elliptic_dyson.harness import default_positions
from elliptic_dyson.kernels import KernelContext, density


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--t", type=float, default=0.3)
    ap.add_argument("--tstar", type=float, default=1.0)
    ap.add_argument("--points", type=int, default=200)
    args = ap.parse_args()
    x = (np.arange(args.points) + 0.5) * math.pi / args.points
    cols = {tag: density(KernelContext.elliptic(tag, default_positions(tag, args.n), args.tstar), args.t, x) for tag in ("B", "C", "D")}
    out = sys.stdout
    out.write("x," + ",".join(f"rho_{t}" for t in cols) + "\n")
    for i, xi in enumerate(x):
        out.write(f"{float(xi)!r}," + ",".join(repr(float(c[i])) for c in cols.values()) + "\n")


if __name__ == "__main__":
    main()
