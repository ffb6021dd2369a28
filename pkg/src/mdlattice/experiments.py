"""Simulation driver and refinement, mollification and stability studies."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from mdlattice.diagnostics import RunHistory
from mdlattice.dirac_step import SpinorField, SpinorStepConfig, step_spinor
from mdlattice.grid import GridSpec, make_grid
from mdlattice.initial_data import InitialData, compute_bounds, mollify, preset, support_radius, with_lorentz_gauge
from mdlattice.wave_step import GaugeField, advance_gauge, initial_gauge


class WindowError(ValueError):
    """Data support plus horizon does not fit inside the window."""


class NumericalError(RuntimeError):
    def __init__(self, level: int, what: str = "field"):
        super().__init__(f"non-finite {what} at level {level}")
        self.level = level


def check_window(data: InitialData, grid: GridSpec) -> None:
    if grid.periodic:
        return
    centre = 0.5 * (grid.xmin + grid.xmax)
    radius = 0.5 * (grid.xmax - grid.xmin)
    r = support_radius(data, grid, centre)
    if r > 0 and r + grid.T > radius + 1e-9 * grid.dx:
        raise WindowError(
            f"spinor support radius {r:.6g} + horizon {grid.T:.6g} exceeds window radius {radius:.6g}")


def iter_levels(data: InitialData, grid: GridSpec, m: float,
                rotation_gain: float = 1.0) -> Iterator[tuple[SpinorField, np.ndarray, np.ndarray]]:
    """Yield (spinor, A+, A-) at levels 0..nt.

    Per step the wave update runs first (it needs the spinor source at level
    k), then the spinor step (it needs A+- at k and k+1).
    """
    if data.nx != grid.nx:
        raise ValueError(f"data has {data.nx} nodes, grid has {grid.nx}")
    cfg = SpinorStepConfig(m=m, boundary=grid.boundary, rotation_gain=rotation_gain)
    spinor = SpinorField(data.u0.copy(), data.v0.copy(), 0)
    yield spinor, data.aplus0, data.aminus0
    if grid.nt == 0:
        return
    with np.errstate(over="ignore", invalid="ignore"):
        gauge: GaugeField = initial_gauge(data.aplus0, data.aminus0, data.aplus1, data.aminus1,
                                          data.u0, data.v0, grid)
    for k in range(grid.nt):
        # overflow is caught by the finiteness checks below
        with np.errstate(over="ignore", invalid="ignore"):
            if k > 0:
                gauge = advance_gauge(gauge, spinor, grid)
            if not gauge.is_finite():
                raise NumericalError(gauge.level, "gauge field")
            spinor = step_spinor(spinor, gauge, grid, cfg)
        if not spinor.is_finite():
            raise NumericalError(spinor.level, "spinor")
        yield spinor, gauge.aplus_curr, gauge.aminus_curr


def run_simulation(data: InitialData, grid: GridSpec, m: float,
                   rotation_gain: float = 1.0, check: bool = True) -> RunHistory:
    if check:
        check_window(data, grid)
    n = grid.nt + 1
    u = np.empty((n, grid.nx), complex)
    v = np.empty((n, grid.nx), complex)
    ap = np.empty((n, grid.nx))
    am = np.empty((n, grid.nx))
    for k, (s, a_p, a_m) in enumerate(iter_levels(data, grid, m, rotation_gain)):
        u[k], v[k], ap[k], am[k] = s.u, s.v, a_p, a_m
    return RunHistory(grid, u, v, ap, am, data, m, compute_bounds(data, grid))


def run_sampled(data: InitialData, grid: GridSpec, m: float, stride: int = 1):
    """Run and keep every ``stride``-th level; returns arrays (u, v, A+, A-)."""
    keep = grid.nt // stride + 1
    u = np.empty((keep, grid.nx), complex)
    v = np.empty((keep, grid.nx), complex)
    ap = np.empty((keep, grid.nx))
    am = np.empty((keep, grid.nx))
    for k, (s, a_p, a_m) in enumerate(iter_levels(data, grid, m)):
        if k % stride == 0:
            j = k // stride
            u[j], v[j], ap[j], am[j] = s.u, s.v, a_p, a_m
    return u, v, ap, am


# -- tables ----------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class ConvergenceTable:
    """Successive-pair distances; ``key`` names the refinement parameter (dx or n)."""

    key: str
    values: np.ndarray
    distance_uv: np.ndarray
    distance_gauge: np.ndarray

    @staticmethod
    def _orders(d: np.ndarray, ratios: np.ndarray) -> np.ndarray:
        out = np.full(d.shape, np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[1:] = np.log(d[:-1] / d[1:]) / np.log(ratios)
        return out

    @property
    def ratios(self) -> np.ndarray:
        v = np.asarray(self.values, float)
        r = v[:-1] / v[1:] if self.key == "dx" else v[1:] / v[:-1]
        return r

    @property
    def order_uv(self) -> np.ndarray:
        return self._orders(self.distance_uv, self.ratios)

    @property
    def order_gauge(self) -> np.ndarray:
        return self._orders(self.distance_gauge, self.ratios)

    def rows(self):
        for r in zip(self.values, self.distance_uv, self.distance_gauge, self.order_uv, self.order_gauge):
            yield tuple(float(x) for x in r)

    def to_csv(self, path, comment: str = "") -> None:
        with open(path, "w") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            fh.write(f"{self.key},distance_uv,distance_gauge,order_uv,order_gauge\n")
            for row in self.rows():
                fh.write(",".join(_fmt(x) for x in row) + "\n")


@dataclass
class StabilityTrace:
    t: np.ndarray
    I: np.ndarray
    fitted_C: float
    fitted_K: float
    g_T: float
    envelope_margin: float
    fit_fraction: float = 0.5
    envelope: np.ndarray = field(default=None, repr=False)

    def to_csv(self, path, comment: str = "") -> None:
        with open(path, "w") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            fh.write(f"# fitted_C={_fmt(self.fitted_C)} fitted_K={_fmt(self.fitted_K)} "
                     f"g_T={_fmt(self.g_T)} envelope_margin={_fmt(self.envelope_margin)}\n")
            fh.write("level,t,I,envelope\n")
            for k, (t, i, e) in enumerate(zip(self.t, self.I, self.envelope)):
                fh.write(f"{k},{_fmt(t)},{_fmt(i)},{_fmt(e)}\n")


# -- convergence under refinement ------------------------------------------

DataSpec = Callable[[GridSpec], InitialData] | dict


def build_data(spec: DataSpec, grid: GridSpec) -> InitialData:
    """``spec`` is a callable grid -> data, or a dict with key "preset" plus preset
    parameters and an optional boolean "lorentz_gauge"."""
    if callable(spec):
        return spec(grid)
    params = dict(spec)
    name = params.pop("preset")
    lorentz = params.pop("lorentz_gauge", False)
    data = preset(name, grid, **params)
    return with_lorentz_gauge(data, grid) if lorentz else data


def _check_halving(dx_list) -> None:
    if len(dx_list) < 2:
        raise ValueError("need at least two grid spacings")
    for a, b in zip(dx_list[:-1], dx_list[1:]):
        if not math.isclose(a, 2.0 * b, rel_tol=1e-12):
            raise ValueError(f"dx_list must halve at every step, got {a} -> {b}")


def _sampled_run(args):
    spec, grid, m, stride = args
    data = build_data(spec, grid)
    check_window(data, grid)
    return run_sampled(data, grid, m, stride)


def _l2_sup(du: np.ndarray, dv: np.ndarray, n_unique: int, dx: float) -> float:
    d = (np.abs(du[:, :n_unique]) ** 2 + np.abs(dv[:, :n_unique]) ** 2).sum(axis=1) * dx
    return float(np.sqrt(d.max()))


def _edge_free(grid: GridSpec, nrows: int, stride: int = 1) -> np.ndarray:
    """Mask of nodes outside the domain of influence of zero-inflow edges.

    Row j holds level j * stride of ``grid``.
    """
    k = stride * np.arange(nrows)[:, None]
    i = np.arange(grid.nx)[None, :]
    if grid.periodic:
        return np.ones((nrows, grid.nx), dtype=bool)
    return (i >= k + 1) & (i <= grid.nx - 2 - k)


def convergence_study(data_spec: DataSpec, dx_list, T: float, m: float,
                      xmin: float = -3.0, xmax: float = 3.0, boundary="zero-inflow",
                      workers: int = 1) -> ConvergenceTable:
    """Distances between successive grids at the levels of the coarsest grid.

    Every coarse node is a fine node under halving, so the comparison is
    restricted to common nodes without interpolation.  With zero-inflow
    edges, nodes the edge treatment can reach are excluded (data whose gauge
    part does not vanish at the edges, e.g. Lorentz-gauge data, would
    otherwise measure the truncation rather than the scheme).
    """
    dx_list = [float(d) for d in dx_list]
    _check_halving(dx_list)
    grids = [make_grid(xmin, xmax, dx, T, boundary) for dx in dx_list]
    strides = [2 ** j for j in range(len(grids))]
    jobs = [(data_spec, g, m, s) for g, s in zip(grids, strides)]
    if workers > 1 and not callable(data_spec):
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_sampled_run, jobs))
    else:
        runs = [_sampled_run(j) for j in jobs]
    d_uv, d_a = [], []
    for j, ((gc, rc), rf) in enumerate(zip(zip(grids, runs), runs[1:])):
        uc, vc, apc, amc = rc
        uf, vf, apf, amf = (a[:, ::2] for a in rf)
        keep = _edge_free(gc, uc.shape[0], strides[j])
        du, dv, dp, dm = (np.where(keep, c - f, 0.0) for c, f in ((uc, uf), (vc, vf), (apc, apf), (amc, amf)))
        d_uv.append(_l2_sup(du, dv, gc.n_unique, gc.dx))
        d_a.append(float(max(np.abs(dp).max(), np.abs(dm).max())))
    return ConvergenceTable("dx", np.asarray(dx_list[:-1]), np.asarray(d_uv), np.asarray(d_a))


def mollification_study(rough_data: InitialData, n_list, grid: GridSpec, m: float) -> ConvergenceTable:
    """C([0,T]; L^2) and sup distances between solutions from successive mollifications."""
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list[:-1], n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    runs = []
    for n in n_list:
        data = mollify(rough_data, n, grid)
        check_window(data, grid)
        runs.append(run_sampled(data, grid, m))
    d_uv, d_a = [], []
    for (u1, v1, p1, m1), (u2, v2, p2, m2) in zip(runs[:-1], runs[1:]):
        d_uv.append(_l2_sup(u1 - u2, v1 - v2, grid.n_unique, grid.dx))
        d_a.append(float(max(np.abs(p1 - p2).max(), np.abs(m1 - m2).max())))
    return ConvergenceTable("n", np.asarray(n_list[:-1]), np.asarray(d_uv), np.asarray(d_a))


# -- stability -------------------------------------------------------------

def gauge_data_gap(a: InitialData, b: InitialData, grid: GridSpec, centre: float = 0.0) -> float:
    """||g0+||^2 + T^2 ||g1+||^2 + ||g0-||^2 + T^2 ||g1-||^2, sup norms over [c-T, c+T]."""
    T = grid.T
    sel = np.abs(grid.x - centre) <= T + 1e-9 * grid.dx

    def sup2(x, y):
        d = np.abs(x - y)[sel]
        return float(d.max() ** 2) if d.size else 0.0

    return (sup2(a.aplus0, b.aplus0) + T * T * sup2(a.aplus1, b.aplus1)
            + sup2(a.aminus0, b.aminus0) + T * T * sup2(a.aminus1, b.aminus1))


def _fit_envelope(t: np.ndarray, I: np.ndarray, g: float, fit_fraction: float):
    """Smallest growth rate C >= 0 (and offset K) whose envelope covers I on the fit window."""
    T = t[-1]
    fit = t <= fit_fraction * T + 1e-12
    I0 = I[0]
    C = 0.0
    K = 0.0
    if g == 0.0:
        pos = fit & (t > 0)
        if I0 > 0 and pos.any():
            C = max(0.0, float(np.max(np.log(I[pos] / I0) / t[pos])))
    else:
        idx = np.flatnonzero(fit)
        hi, lo = idx[-1], idx[len(idx) // 2]
        if I[lo] > 0 and I[hi] > 0 and t[hi] > t[lo]:
            C = max(0.0, math.log(I[hi] / I[lo]) / (t[hi] - t[lo]))
        K = max(0.0, float(np.max((I[fit] * np.exp(-C * t[fit]) - I0) / g)))
    return C, K


def stability_study(data: InitialData, delta: float, perturbation: InitialData, grid: GridSpec,
                    m: float, centre: float = 0.0, fit_fraction: float = 0.5) -> StabilityTrace:
    """Difference functional over the shrinking interval [c - T + t, c + T - t].

    The perturbed run starts from ``data + delta * perturbation``.
    """
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    c = grid.node_index(centre)
    nt = grid.nt
    if c - nt < 0 or c + nt > grid.nx - 1:
        raise WindowError("interval [c - T, c + T] leaves the window")
    other = data.combine(perturbation, delta)
    check_window(data, grid)
    check_window(other, grid)
    I = np.empty(nt + 1)
    for k, ((s1, _, _), (s2, _, _)) in enumerate(zip(iter_levels(data, grid, m),
                                                     iter_levels(other, grid, m))):
        lo, hi = c - (nt - k), c + (nt - k)
        w = np.abs(s1.u[lo:hi + 1] - s2.u[lo:hi + 1]) ** 2 + np.abs(s1.v[lo:hi + 1] - s2.v[lo:hi + 1]) ** 2
        I[k] = (w.sum() - 0.5 * (w[0] + w[-1])) * grid.dx if hi > lo else 0.0
    t = grid.t
    g = gauge_data_gap(data, other, grid, centre)
    C, K = _fit_envelope(t, I, g, fit_fraction)
    env = (I[0] + K * g) * np.exp(C * t)
    return StabilityTrace(t, I, C, K, g, float(np.max(I - env)), fit_fraction, env)
