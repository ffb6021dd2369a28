"""Solutions from increasingly mollified box data on one fine grid."""

import argparse

from mdlattice.experiments import mollification_study
from mdlattice.grid import make_grid
from mdlattice.initial_data import preset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=float, default=1.0)
    ap.add_argument("--T", type=float, default=0.5)
    ap.add_argument("--dx-exp", type=int, default=10, help="grid spacing is 2**-dx_exp")
    ap.add_argument("--width", type=float, default=0.5)
    ap.add_argument("--n", type=int, nargs="+", default=[4, 8, 16, 32, 64])
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()

    grid = make_grid(-2.0, 2.0, 2.0 ** -args.dx_exp, args.T)
    box = preset("box", grid, width=args.width, component="both")
    table = mollification_study(box, args.n, grid, args.m)
    # d(u,v) compares the runs for n and for the next n in the list
    print(f"{'n':>5} {'d(u,v)':>12} {'d(A)':>12}")
    for n, du, da, _, _ in table.rows():
        print(f"{int(n):5d} {du:12.4e} {da:12.4e}")
    d = table.distance_uv
    print("strictly decreasing:", bool((d[1:] < d[:-1]).all()))
    if args.csv:
        table.to_csv(args.csv)


if __name__ == "__main__":
    main()
