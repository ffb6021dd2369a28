"""Difference functional for perturbed Gaussian data and its fitted growth envelope."""

import argparse

from mdlattice.experiments import stability_study
from mdlattice.grid import make_grid
from mdlattice.initial_data import preset

PACKET = dict(u_amp=1.0, v_amp=0.8, v_center=0.3, width=0.25, momentum=3.0, aplus0=0.5, aminus0=-0.4)
PERTURB = dict(u_amp=0.5, v_amp=-0.7, center=-0.2, v_center=0.1, width=0.3)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=float, default=1.0)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--dx-exp", type=int, default=8)
    ap.add_argument("--delta", type=float, nargs="+", default=[0.0, 1e-2, 1e-3, 1e-4])
    ap.add_argument("--gauge-perturbation", action="store_true",
                    help="perturb the gauge data as well as the spinor")
    args = ap.parse_args()

    grid = make_grid(-4.0, 4.0, 2.0 ** -args.dx_exp, args.T)
    data = preset("gaussian_packet", grid, **PACKET)
    extra = dict(aplus0=0.3, aminus1=-0.2) if args.gauge_perturbation else {}
    pert = preset("gaussian_packet", grid, **PERTURB, **extra)
    print(f"{'delta':>8} {'sup I':>12} {'sup I/d^2':>12} {'C':>9} {'envelope':>10}")
    for d in args.delta:
        tr = stability_study(data, d, pert, grid, args.m)
        scaled = tr.I.max() / d ** 2 if d > 0 else float("nan")
        print(f"{d:8.0e} {tr.I.max():12.4e} {scaled:12.6f} {tr.fitted_C:9.4f} {tr.envelope_margin:10.2e}")


if __name__ == "__main__":
    main()
