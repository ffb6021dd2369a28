"""Refinement study for the Gaussian packet: successive-grid distances and observed orders."""

import argparse

from mdlattice.experiments import convergence_study

PACKET = dict(preset="gaussian_packet", u_amp=1.0, v_amp=0.8, v_center=0.3, width=0.25, momentum=3.0,
              aplus0=0.5, aminus0=-0.4)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=float, default=1.0)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--coarsest", type=int, default=6, help="coarsest dx is 2**-coarsest")
    ap.add_argument("--levels", type=int, default=5)
    ap.add_argument("--lorentz", action="store_true", help="use constraint-satisfying Lorentz-gauge data")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()

    spec = dict(PACKET, lorentz_gauge=args.lorentz)
    dx_list = [2.0 ** -j for j in range(args.coarsest, args.coarsest + args.levels)]
    table = convergence_study(spec, dx_list, args.T, args.m, -4.0, 4.0, workers=args.workers)
    print(f"{'dx':>12} {'d(u,v)':>12} {'d(A)':>12} {'order uv':>9} {'order A':>9}")
    for dx, du, da, ou, oa in table.rows():
        print(f"{dx:12.4e} {du:12.4e} {da:12.4e} {ou:9.3f} {oa:9.3f}")
    if args.csv:
        table.to_csv(args.csv)


if __name__ == "__main__":
    main()
