"""Command line: ``mdlattice {simulate,verify,converge,stability} --config FILE``.

Config files are flat TOML (``key = value``, lists in brackets, preset
parameters as dotted keys such as ``params.width = 0.25``).

Exit codes: 0 pass, 1 check failure, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import tomli

from mdlattice import diagnostics as diag
from mdlattice.experiments import (NumericalError, WindowError, check_window, convergence_study,
                                   iter_levels, mollification_study, stability_study)
from mdlattice.grid import GridSpec, make_grid
from mdlattice.initial_data import InitialData, compute_bounds, preset, read_csv, with_lorentz_gauge

log = logging.getLogger("mdlattice")

EXIT_OK, EXIT_CHECK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    preset: str = "gaussian_packet"
    params: dict = field(default_factory=dict)
    data_csv: str | None = None
    lorentz_gauge: bool = False
    m: float = 0.0
    xmin: float = -4.0
    xmax: float = 4.0
    dx: float = 2.0 ** -7
    T: float = 1.0
    boundary: str = "zero-inflow"
    out: str = "out"
    stride: int = 0
    workers: int = 1
    # study parameters
    dx_list: list = field(default_factory=list)
    n_list: list = field(default_factory=list)
    delta_list: list = field(default_factory=list)
    perturbation: str = "gaussian_packet"
    perturbation_params: dict = field(default_factory=dict)
    # tolerances
    tol_charge_drift: float = 1e-12
    tol_cone: float = 1e-12
    tol_margin: float = 1e-10
    tol_lorentz: float = math.inf
    tol_local_conservation: float = math.inf
    min_order: float = 1.9
    monotone_only: bool = False
    scaling_rtol: float = 0.1
    envelope_tol: float = 1e-10
    fault_rotation_gain: float = 1.0

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        def need(ok, key, msg):
            if not ok:
                raise ConfigError(f"{key}: {msg}")

        need(isinstance(self.params, dict), "params", "must be a table")
        need(self.m >= 0, "m", "must be >= 0")
        need(self.dx > 0, "dx", "must be > 0")
        need(self.T >= 0, "T", "must be >= 0")
        need(self.xmax > self.xmin, "xmax", "must exceed xmin")
        need(self.boundary in ("zero-inflow", "periodic"), "boundary", "must be zero-inflow or periodic")
        need(self.stride >= 0, "stride", "must be >= 0")
        need(self.workers >= 1, "workers", "must be >= 1")
        for key in ("dx_list", "n_list", "delta_list"):
            need(isinstance(getattr(self, key), list), key, "must be a list")
        for a, b in zip(self.dx_list[:-1], self.dx_list[1:]):
            need(math.isclose(a, 2.0 * b, rel_tol=1e-12), "dx_list", f"must halve at every step ({a} -> {b})")
        need(all(d >= 0 for d in self.delta_list), "delta_list", "entries must be >= 0")

    def tolerances(self) -> dict:
        return {k: v for k, v in asdict(self).items()
                if k.startswith("tol_") or k in ("min_order", "scaling_rtol", "envelope_tol")}

    def digest(self) -> str:
        # where results go and how many processes compute them do not change them
        fields = {k: v for k, v in asdict(self).items() if k not in ("out", "workers")}
        blob = json.dumps(fields, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def comment(self) -> str:
        return f"config_sha256={self.digest()} tolerances={json.dumps(self.tolerances(), sort_keys=True)}"


def load_config(path: str | Path, out: str | None = None) -> SimConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = tomli.loads(p.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    if out is not None:
        raw["out"] = out
    try:
        return SimConfig.from_dict(raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def make_setup(cfg: SimConfig) -> tuple[GridSpec, InitialData]:
    grid = make_grid(cfg.xmin, cfg.xmax, cfg.dx, cfg.T, cfg.boundary)
    if cfg.data_csv:
        x, data = read_csv(cfg.data_csv)
        if x.size != grid.nx or not np.allclose(x, grid.x, rtol=0, atol=1e-9 * grid.dx):
            raise ConfigError("data_csv: node coordinates do not match xmin/xmax/dx")
    else:
        data = preset(cfg.preset, grid, **cfg.params)
    if cfg.lorentz_gauge:
        data = with_lorentz_gauge(data, grid)
    check_window(data, grid)
    return grid, data


# -- output ----------------------------------------------------------------

def _f(x) -> str:
    return repr(float(x))


def _num(x) -> str:
    return str(int(x)) if isinstance(x, (int, np.integer)) else _f(x)


def write_snapshot(path: Path, grid: GridSpec, u, v, ap, am, comment: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {comment}\n")
        fh.write("x,re_u,im_u,re_v,im_v,aplus,aminus\n")
        for row in zip(grid.x, u.real, u.imag, v.real, v.imag, ap, am):
            fh.write(",".join(_f(c) for c in row) + "\n")


def write_report(path: Path, report: diag.DiagnosticsReport, comment: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {comment}\n")
        for key, value in report.scalars().items():
            fh.write(f"{key} = {_num(value)}\n")
        for j, value in enumerate(report.equicontinuity_margins):
            fh.write(f"equicontinuity_margin_{j} = {_num(value)}\n")


def write_series(path: Path, history: diag.RunHistory, report: diag.DiagnosticsReport, comment: str) -> None:
    grid = history.grid
    centre, L = diag.default_cones(grid, history.nlevels)
    cone_charge = np.full(history.nlevels, np.nan)
    if L >= 1:
        cone_charge[:L + 1] = diag.cone_charge_series(history, diag.ConeRegion(centre, L))
    if history.nlevels >= 3:
        local = diag.local_conservation_field(history).max(axis=1)
        lorentz = diag.lorentz_residual_field(history).max(axis=1)
    else:
        local = lorentz = np.full(history.nlevels, np.nan)
    with open(path, "w") as fh:
        fh.write(f"# {comment}\n")
        fh.write("level,t,charge,cone_charge,local_conservation_residual,lorentz_residual\n")
        for k in range(history.nlevels):
            fh.write(f"{k},{_f(k * grid.dt)},{_f(report.charge_series[k])},{_f(cone_charge[k])},"
                     f"{_f(local[k])},{_f(lorentz[k])}\n")


def _simulate(cfg: SimConfig, outdir: Path):
    grid, data = make_setup(cfg)
    outdir.mkdir(parents=True, exist_ok=True)
    n = grid.nt + 1
    u = np.empty((n, grid.nx), complex)
    v = np.empty((n, grid.nx), complex)
    ap = np.empty((n, grid.nx))
    am = np.empty((n, grid.nx))
    comment = cfg.comment()
    for k, (s, a_p, a_m) in enumerate(iter_levels(data, grid, cfg.m, cfg.fault_rotation_gain)):
        u[k], v[k], ap[k], am[k] = s.u, s.v, a_p, a_m
        if cfg.stride and (k % cfg.stride == 0 or k == grid.nt):
            write_snapshot(outdir / f"snapshot_{k:06d}.csv", grid, s.u, s.v, a_p, a_m, comment)
    history = diag.RunHistory(grid, u, v, ap, am, data, cfg.m, compute_bounds(data, grid))
    report = diag.diagnose(history)
    write_report(outdir / "report.txt", report, comment)
    write_series(outdir / "series.csv", history, report, comment)
    return history, report


def cmd_simulate(cfg: SimConfig) -> int:
    _, report = _simulate(cfg, Path(cfg.out))
    print(f"charge drift {report.max_charge_drift:.3e}; outputs in {cfg.out}")
    return EXIT_OK


def margin_checks(report: diag.DiagnosticsReport, cfg: SimConfig) -> list[tuple[str, float, float]]:
    equi = max(report.equicontinuity_margins, default=-math.inf)
    return [
        ("charge_drift", report.max_charge_drift, cfg.tol_charge_drift),
        ("cone_charge_increase", report.cone_violations, cfg.tol_cone),
        ("pointwise_margin", report.pointwise_margin, cfg.tol_margin),
        ("tail_margin", report.tail_margin, cfg.tol_margin),
        ("equicontinuity_margin", equi, cfg.tol_margin),
        ("gauge_sup_margin", report.gauge_sup_margin, cfg.tol_margin),
        ("lorentz_residual", report.lorentz_residual, cfg.tol_lorentz),
        ("local_conservation_residual", report.local_conservation_residual, cfg.tol_local_conservation),
    ]


def cmd_verify(cfg: SimConfig) -> int:
    outdir = Path(cfg.out)
    _, report = _simulate(cfg, outdir)
    ok = True
    with open(outdir / "margins.csv", "w") as fh:
        fh.write(f"# {cfg.comment()}\n")
        fh.write("check,value,tolerance,pass\n")
        for name, value, tol in margin_checks(report, cfg):
            # NaN means the check does not apply to this geometry
            passed = math.isnan(value) or value <= tol
            ok &= passed
            fh.write(f"{name},{_f(value)},{_f(tol)},{int(passed)}\n")
            print(f"{'PASS' if passed else 'FAIL'}  {name:<30s} {value: .3e}  (tol {tol:.1e})")
    return EXIT_OK if ok else EXIT_CHECK


def _data_spec(cfg: SimConfig) -> dict:
    return {"preset": cfg.preset, "lorentz_gauge": cfg.lorentz_gauge, **cfg.params}


def cmd_converge(cfg: SimConfig) -> int:
    """dx refinement study, or a mollification study when ``n_list`` is given."""
    if cfg.n_list:
        if len(cfg.n_list) < 2:
            raise ConfigError("n_list: need at least two entries")
        grid, rough = make_setup(cfg)
        table = mollification_study(rough, cfg.n_list, grid, cfg.m)
    else:
        if len(cfg.dx_list) < 2:
            raise ConfigError("dx_list: need at least two entries")
        table = convergence_study(_data_spec(cfg), cfg.dx_list, cfg.T, cfg.m, cfg.xmin, cfg.xmax,
                                  cfg.boundary, workers=cfg.workers)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    table.to_csv(outdir / "convergence.csv", cfg.comment())
    for row in table.rows():
        print("{}={:.6g}  d_uv={:.3e}  d_A={:.3e}  order_uv={:.3f}  order_A={:.3f}".format(table.key, *row))
    if cfg.monotone_only or cfg.n_list:
        ok = bool(np.all(np.diff(table.distance_uv) < 0) and np.all(np.diff(table.distance_gauge) <= 0))
    else:
        orders = np.concatenate([table.order_uv[1:], table.order_gauge[1:]])
        ok = bool(orders.size and np.all(orders >= cfg.min_order))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_stability(cfg: SimConfig) -> int:
    if not cfg.delta_list:
        raise ConfigError("delta_list: need at least one entry")
    grid, data = make_setup(cfg)
    pert = preset(cfg.perturbation, grid, **cfg.perturbation_params)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    comment = cfg.comment()
    ok = True
    scaled = []
    with open(outdir / "stability.csv", "w") as fh:
        fh.write(f"# {comment}\n")
        fh.write("delta,sup_I,sup_I_over_delta2,fitted_C,envelope_margin\n")
        for j, delta in enumerate(cfg.delta_list):
            tr = stability_study(data, delta, pert, grid, cfg.m)
            tr.to_csv(outdir / f"stability_trace_{j}.csv", f"{comment} delta={delta!r}")
            sup = float(tr.I.max())
            ratio = sup / delta ** 2 if delta > 0 else math.nan
            if delta == 0:
                ok &= bool(np.all(tr.I == 0.0))
            else:
                scaled.append(ratio)
                ok &= tr.envelope_margin <= cfg.envelope_tol
            fh.write(f"{_f(delta)},{_f(sup)},{_f(ratio)},{_f(tr.fitted_C)},{_f(tr.envelope_margin)}\n")
            print(f"delta={delta:.1e}  sup I={sup:.4e}  sup I/delta^2={ratio:.6g}  C={tr.fitted_C:.4g}")
    if len(scaled) > 1:
        ref = scaled[-1]
        ok &= all(abs(s - ref) <= cfg.scaling_rtol * abs(ref) for s in scaled)
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "converge": cmd_converge, "stability": cmd_stability}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="mdlattice", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="TOML config file")
    parser.add_argument("--out", default=None, help="output directory (overrides the config)")
    parser.add_argument("--workers", type=int, default=None, help="parallel runs in studies")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.out)
        if args.workers is not None:
            cfg.workers = args.workers
            cfg.validate()
        return COMMANDS[args.command](cfg)
    except (ConfigError, WindowError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except NumericalError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
