"""Run the inequality diagnostics over a small corpus and grid refinements."""

import argparse

from mdlattice.diagnostics import diagnose
from mdlattice.experiments import run_simulation
from mdlattice.grid import make_grid
from mdlattice.initial_data import preset

CORPUS = {
    "gaussian": ("gaussian_packet", dict(u_amp=1.0, v_amp=0.8, v_center=0.3, width=0.25, momentum=3.0,
                                         aplus0=0.5, aminus0=-0.4)),
    "box": ("box", dict(width=1.0, center=0.2, component="both")),
    "box_u": ("box", dict(width=0.5, height=2.0)),
}
KEYS = ("max_charge_drift", "cone_violations", "pointwise_margin", "tail_margin", "gauge_sup_margin",
        "equicontinuity_margin_max", "lorentz_residual", "local_conservation_residual")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=float, nargs="+", default=[0.0, 0.5, 1.0, 2.0])
    ap.add_argument("--dx-exp", type=int, nargs="+", default=[6, 7, 8])
    ap.add_argument("--T", type=float, default=1.0)
    args = ap.parse_args()

    print("data,m,dx," + ",".join(KEYS))
    for j in args.dx_exp:
        grid = make_grid(-4.0, 4.0, 2.0 ** -j, args.T)
        for name, (kind, params) in CORPUS.items():
            data = preset(kind, grid, **params)
            for m in args.m:
                s = diagnose(run_simulation(data, grid, m)).scalars()
                print(f"{name},{m},{grid.dx}," + ",".join(f"{s[k]:.3e}" for k in KEYS))


if __name__ == "__main__":
    main()
