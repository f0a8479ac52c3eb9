"""Calibrate the fd-order2 constants K in conelag/tolerances.py.

For every positive registry example with a Lagrangian pair, run the
finite-difference families on a ladder of grids and record
(residual max - FD_FLOOR) / (hx^2 + hy^2) per residual name.  The printed K is
the largest ratio times a safety factor of 2.

    python3 scripts/calibrate_tolerances.py
"""

from __future__ import annotations

import argparse

from conelag.registry import DEFAULT_SUITE, make_example
from conelag.suite import run_suite
from conelag.tolerances import FD_FLOOR, FD_K

SAFETY = 2.0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--factors", default="0.25,0.5,1", help="grid scale factors relative to the default grid")
    args = ap.parse_args(argv)
    factors = [float(f) for f in args.factors.split(",")]
    worst = {name: (0.0, None) for name in FD_K}
    for entry in DEFAULT_SUITE:
        ex = make_example(entry)
        if ex.make_pair is None or ex.declared_failures:
            continue
        for f in factors:
            shape = tuple(max(8, int(round(n * f))) for n in ex.domain.shape)
            rep = run_suite(ex, grid=shape, backend="fd", families=("lagrangian", "identities", "hopf"))
            hx, hy = ex.domain.with_shape(shape).spacing
            for name in FD_K:
                if name not in rep.residuals or rep.residuals[name].empty:
                    continue
                ratio = max(rep.residuals[name].max - FD_FLOOR, 0.0) / (hx * hx + hy * hy)
                if ratio > worst[name][0]:
                    worst[name] = (ratio, f"{entry} {shape[0]}x{shape[1]}")
    print("FD_K = {")
    for name, (ratio, where) in worst.items():
        print(f'    "{name}": {SAFETY * ratio:.3g},  # worst: {where}')
    print("}")


if __name__ == "__main__":
    main()
