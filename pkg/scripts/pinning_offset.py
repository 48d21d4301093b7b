#!/usr/bin/env python3
"""Measure how far wall-pinned coordinates sit from their targets as eps shrinks.

For type D with two particles both targets lie on a reflecting wall.  The
printed offset should track sqrt(2 eps / pi), the mean of a reflected
Brownian bridge of variance eps, for every time step dt.
"""

import argparse
import math

from elliptic_dyson.harness import default_positions
from elliptic_dyson.sde import Model, SdeSpec, simulate
from elliptic_dyson.special_fn import ProcessClock


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    u = default_positions("D", 2)
    print("eps      dt       offset_x1  sqrt(2eps/pi)  se")
    for eps in (1e-2, 4e-3, 1e-3):
        for dt in (1e-4, 5e-5):
            t_end = round((1.0 - eps) / dt) * dt
            spec = SdeSpec(Model.ELLIPTIC_D, u, ProcessClock(1.0), dt=dt, n_paths=args.paths, seed=args.seed, t_end=t_end, record_every=round(t_end / dt))
            x = simulate(spec).at(t_end)[:, 0]
            se = x.std(ddof=1) / math.sqrt(x.size)
            print(f"{eps:<8.0e} {dt:<8.0e} {x.mean():<10.4f} {math.sqrt(2 * eps / math.pi):<14.4f} {se:.4f}")


if __name__ == "__main__":
    main()
