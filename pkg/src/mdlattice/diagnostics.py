"""Signed-margin checks of the charge identities and a-priori bounds on a stored run.

Every inequality ``lhs <= rhs`` is reported as ``lhs - rhs``; a non-positive
value means the bound holds on the lattice.  Integrals use trapezoid
weights: in space over cone cross-sections, in time over levels.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from mdlattice.dirac_step import SpinorField
from mdlattice.grid import ConeRegion, GridSpec, cone_intersection_apex, cone_slice, symmetric_difference_area
from mdlattice.initial_data import DataBounds, InitialData, charge, compute_bounds


@dataclass
class RunHistory:
    """Stored trajectory; row k of each array is time level k."""

    grid: GridSpec
    u: np.ndarray
    v: np.ndarray
    aplus: np.ndarray
    aminus: np.ndarray
    data: InitialData
    m: float
    bounds: DataBounds | None = None

    def __post_init__(self):
        if self.bounds is None:
            self.bounds = compute_bounds(self.data, self.grid)
        n = self.grid.nt + 1
        for name in ("u", "v", "aplus", "aminus"):
            if getattr(self, name).shape != (n, self.grid.nx):
                raise ValueError(f"{name} must have shape {(n, self.grid.nx)}")

    @property
    def nlevels(self) -> int:
        return self.u.shape[0]

    def spinor(self, level: int) -> SpinorField:
        return SpinorField(self.u[level], self.v[level], level)

    def density(self) -> np.ndarray:
        return np.abs(self.u) ** 2 + np.abs(self.v) ** 2


@dataclass
class DiagnosticsReport:
    charge_series: np.ndarray
    max_charge_drift: float
    cone_violations: float
    pointwise_margin: float
    pointwise_skipped: int
    tail_margin: float
    gauge_sup_margin: float
    lorentz_residual: float
    local_conservation_residual: float
    equicontinuity_margins: list[float] = field(default_factory=list)

    def scalars(self) -> dict[str, float]:
        d = asdict(self)
        d.pop("charge_series")
        d["equicontinuity_margin_max"] = max(self.equicontinuity_margins, default=float("nan"))
        d.pop("equicontinuity_margins")
        return d


def q_factor(m: float, t):
    """Growth factor e^{mt} m (mt + 1) of the pointwise bound."""
    return np.exp(m * t) * m * (m * t + 1.0)


# -- quadrature helpers ----------------------------------------------------

def _prefix(rows: np.ndarray) -> np.ndarray:
    """Prefix sums along the last axis with a leading zero column."""
    p = np.zeros(rows.shape[:-1] + (rows.shape[-1] + 1,))
    np.cumsum(rows, axis=-1, out=p[..., 1:])
    return p


def _trap_sum(prefix: np.ndarray, row: np.ndarray, lo, hi):
    """Trapezoid sum (unit spacing) of ``row`` over inclusive node ranges [lo, hi]."""
    lo = np.asarray(lo)
    hi = np.asarray(hi)
    s = prefix[hi + 1] - prefix[lo] - 0.5 * (row[lo] + row[hi])
    return np.where(hi > lo, s, 0.0)


def pl_integral(row: np.ndarray, grid: GridSpec, a: float, b: float) -> float:
    """Exact integral over [a, b] of the piecewise-linear interpolant of ``row``."""
    if b <= a:
        return 0.0
    dx = grid.dx
    tol = 1e-9 * dx
    if a < grid.xmin - tol or b > grid.xmax + tol:
        raise ValueError(f"interval [{a}, {b}] leaves the window")
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (row[1:] + row[:-1]) * dx)])

    def antideriv(y):
        s = (y - grid.xmin) / dx
        p = int(np.clip(np.floor(s + 1e-9), 0, grid.nx - 2))
        r = (s - p) * dx
        slope = (row[p + 1] - row[p]) / dx
        return cum[p] + r * row[p] + 0.5 * r * r * slope

    return float(antideriv(min(b, grid.xmax)) - antideriv(max(a, grid.xmin)))


def cone_integral(values: np.ndarray, grid: GridSpec, x_apex: float, t_apex: float) -> float:
    """Space-time integral of ``values[k, i]`` over the backward cone with the given apex.

    Cross-sections are integrated exactly for the piecewise-linear
    interpolant, so apexes off the lattice are handled; levels are combined
    with the trapezoid rule, including a partial last interval.
    """
    if t_apex <= 0:
        return 0.0
    dt = grid.dt
    K = int(math.floor(t_apex / dt + 1e-9))
    if K >= values.shape[0]:
        raise ValueError(f"cone height {t_apex} exceeds stored levels")
    times = list(dt * np.arange(K + 1))
    slices = [pl_integral(values[k], grid, x_apex - (t_apex - times[k]), x_apex + (t_apex - times[k]))
              for k in range(K + 1)]
    if t_apex - times[-1] > 1e-9 * dt:
        times.append(t_apex)
        slices.append(0.0)
    times = np.asarray(times)
    slices = np.asarray(slices)
    return float(np.sum(0.5 * (slices[1:] + slices[:-1]) * np.diff(times)))


def lattice_cone_integral(values: np.ndarray, grid: GridSpec, cone: ConeRegion) -> float:
    """Trapezoid cone integral for a lattice-aligned apex."""
    L = cone.apex_level
    total = 0.0
    for k in range(L + 1):
        lo, hi = cone_slice(grid, cone, k)
        row = values[k]
        s = row[lo:hi + 1].sum() - 0.5 * (row[lo] + row[hi]) if hi > lo else 0.0
        total += (0.5 if k in (0, L) else 1.0) * s
    return total * grid.dx * grid.dt


def _shifted_initial(profile: np.ndarray, grid: GridSpec, nlevels: int, direction: int) -> np.ndarray:
    """Rows g[k, j] = profile[j - direction*k]; zero outside the window (wrapped if periodic)."""
    out = np.zeros((nlevels, grid.nx))
    n = grid.n_unique
    for k in range(nlevels):
        s = direction * k
        if grid.periodic:
            out[k, :n] = np.roll(profile[:n], s)
            out[k, n:] = out[k, 0]
        elif s >= 0:
            if s < grid.nx:
                out[k, s:] = profile[:grid.nx - s]
        elif -s < grid.nx:
            out[k, :grid.nx + s] = profile[-s:]
    return out


# -- charge ----------------------------------------------------------------

def total_charge(spinor: SpinorField, grid: GridSpec) -> float:
    return charge(spinor.u, spinor.v, grid)


def charge_series(history: RunHistory) -> np.ndarray:
    dens = history.density()[:, :history.grid.n_unique]
    return dens.sum(axis=1) * history.grid.dx


def charge_drift(series: np.ndarray) -> float:
    """Max relative deviation from the initial charge (absolute if it is zero)."""
    ref = series[0]
    dev = float(np.max(np.abs(series - ref)))
    return dev / ref if ref > 0 else dev


def cone_charge_series(history: RunHistory, cone: ConeRegion) -> np.ndarray:
    grid = history.grid
    if not cone.fits(grid):
        raise ValueError(f"{cone} does not fit in the window")
    if cone.apex_level > grid.nt:
        raise ValueError(f"apex level {cone.apex_level} beyond horizon level {grid.nt}")
    dens = history.density()
    out = np.empty(cone.apex_level + 1)
    for k in range(cone.apex_level + 1):
        lo, hi = cone_slice(grid, cone, k)
        row = dens[k]
        out[k] = (row[lo:hi + 1].sum() - 0.5 * (row[lo] + row[hi])) * grid.dx if hi > lo else 0.0
    return out


def cone_charge_increase(history: RunHistory, apex_level: int) -> float:
    """Largest level-to-level increase of cone charge over every apex at ``apex_level``."""
    grid = history.grid
    L = apex_level
    centres = np.arange(L, grid.nx - L)
    if L < 1 or centres.size == 0:
        return -math.inf
    dens = history.density()
    prev = None
    worst = -math.inf
    for k in range(L + 1):
        row = dens[k]
        p = _prefix(row)
        half = L - k
        cur = _trap_sum(p, row, centres - half, centres + half) * grid.dx
        if prev is not None:
            worst = max(worst, float(np.max(cur - prev)))
        prev = cur
    return worst


# -- pointwise and tail bounds ---------------------------------------------

def pointwise_bound_margins(history: RunHistory) -> np.ndarray:
    """Per-node margin of the pointwise |u|^2, |v|^2 bounds; NaN where the cone leaves the window."""
    grid, m = history.grid, history.m
    u0, v0 = history.data.u0, history.data.v0
    rho0 = np.abs(u0) ** 2 + np.abs(v0) ** 2
    p = _prefix(rho0)
    out = np.full((history.nlevels, grid.nx), np.nan)
    for k in range(history.nlevels):
        i = np.arange(k, grid.nx - k)
        if i.size == 0:
            break
        t = k * grid.dt
        base = _trap_sum(p, rho0, i - k, i + k) * grid.dx
        qb = q_factor(m, t) * base
        grow = math.exp(m * t)
        mu = np.abs(history.u[k, i]) ** 2 - qb - grow * np.abs(u0[i - k]) ** 2
        mv = np.abs(history.v[k, i]) ** 2 - qb - grow * np.abs(v0[i + k]) ** 2
        out[k, i] = np.maximum(mu, mv)
    return out


def pointwise_bound_report(history: RunHistory) -> float:
    return float(np.nanmax(pointwise_bound_margins(history)))


def _tail(row: np.ndarray, grid: GridSpec, M: float) -> float:
    """Integral of the PL interpolant over {|x| >= M} within the window."""
    return pl_integral(row, grid, grid.xmin, -M) + pl_integral(row, grid, M, grid.xmax)


def tail_report(history: RunHistory, M: float, tau_level: int) -> float:
    grid, m = history.grid, history.m
    if not 0 <= tau_level < history.nlevels:
        raise ValueError(f"tau_level {tau_level} outside stored levels")
    tau = tau_level * grid.dt
    if not M - tau > 0:
        raise ValueError(f"need M - tau > 0, got M={M}, tau={tau}")
    if -M < grid.xmin - 1e-12 or M > grid.xmax + 1e-12:
        raise ValueError(f"region |x| >= {M} is not inside the window")
    u0, v0 = history.data.u0, history.data.v0
    rho0 = np.abs(u0) ** 2 + np.abs(v0) ** 2
    spread = 2.0 * tau * q_factor(m, tau) * _tail(rho0, grid, M - tau)
    grow = math.exp(m * tau)
    su = _shifted_initial(np.abs(u0) ** 2, grid, tau_level + 1, +1)[tau_level]
    sv = _shifted_initial(np.abs(v0) ** 2, grid, tau_level + 1, -1)[tau_level]
    mu = _tail(np.abs(history.u[tau_level]) ** 2, grid, M) - spread - grow * _tail(su, grid, M)
    mv = _tail(np.abs(history.v[tau_level]) ** 2, grid, M) - spread - grow * _tail(sv, grid, M)
    return float(max(mu, mv))


def gauge_sup_report(history: RunHistory) -> float:
    b = history.bounds
    T = (history.nlevels - 1) * history.grid.dt
    sup = max(np.max(np.abs(history.aplus)), np.max(np.abs(history.aminus)))
    return float(sup - (b.C1 * (T + 1.0) + b.C0 * T))


# -- residuals -------------------------------------------------------------

def _interior_mask(grid: GridSpec, nlevels: int) -> np.ndarray:
    """Nodes (k, i) with 1 <= k <= nlevels-2 whose centred stencil is free of edge influence.

    With zero-inflow edges the edge updates are not the free-space solution;
    their influence travels inward one node per level.
    """
    k = np.arange(nlevels)[:, None]
    i = np.arange(grid.nx)[None, :]
    inner = (k >= 1) & (k <= nlevels - 2) & (i >= 1) & (i <= grid.nx - 2)
    if grid.periodic:
        return inner
    return inner & (i >= k + 1) & (i <= grid.nx - 2 - k)


def _centred_defect(density_t: np.ndarray, flux_x: np.ndarray, grid: GridSpec) -> np.ndarray:
    """(D_t a + D_x b) with centred differences; zero rows/cols at the edges."""
    out = np.zeros_like(density_t)
    out[1:-1, 1:-1] = ((density_t[2:, 1:-1] - density_t[:-2, 1:-1]) / (2 * grid.dt)
                       + (flux_x[1:-1, 2:] - flux_x[1:-1, :-2]) / (2 * grid.dx))
    return out


def lorentz_residual_field(history: RunHistory) -> np.ndarray:
    grid = history.grid
    if history.nlevels < 3:
        raise ValueError("need at least 3 levels (nt >= 2)")
    A0 = 0.5 * (history.aplus + history.aminus)
    A1 = 0.5 * (history.aplus - history.aminus)
    r = np.abs(_centred_defect(A0, -A1, grid))
    r[~_interior_mask(grid, history.nlevels)] = 0.0
    return r


def lorentz_residual(history: RunHistory) -> float:
    return float(lorentz_residual_field(history).max())


def local_conservation_field(history: RunHistory) -> np.ndarray:
    grid = history.grid
    if history.nlevels < 3:
        raise ValueError("need at least 3 levels (nt >= 2)")
    au = np.abs(history.u) ** 2
    av = np.abs(history.v) ** 2
    r = np.abs(_centred_defect(au + av, au - av, grid))
    r[~_interior_mask(grid, history.nlevels)] = 0.0
    return r


def local_conservation_residual(history: RunHistory) -> float:
    return float(local_conservation_field(history).max())


# -- equicontinuity --------------------------------------------------------

def _intersection_integral(values: np.ndarray, grid: GridSpec, xs: float, ts: float) -> float:
    """Cone integral over the intersection cone, on the lattice rule when the apex is a node."""
    if ts <= 0:
        return 0.0
    si, sk = (xs - grid.xmin) / grid.dx, ts / grid.dt
    i, k = round(si), round(sk)
    if abs(si - i) < 1e-9 and abs(sk - k) < 1e-9:
        return lattice_cone_integral(values, grid, ConeRegion(i, k))
    return cone_integral(values, grid, xs, ts)


def equicontinuity_margin(history: RunHistory, cone_a: ConeRegion, cone_b: ConeRegion) -> float:
    """Margin of the bound on differences of cone integrals of |u|^2 and |v|^2.

    The time constant is the larger apex height, the smallest value for
    which the bound is stated.
    """
    grid, m = history.grid, history.m
    for c in (cone_a, cone_b):
        if not c.fits(grid) or c.apex_level >= history.nlevels:
            raise ValueError(f"{c} is not inside the stored history")
    xa, ta = cone_a.apex(grid)
    xb, tb = cone_b.apex(grid)
    T = max(ta, tb)
    xs, ts = cone_intersection_apex(xa, ta, xb, tb)
    meas = symmetric_difference_area(xa, ta, xb, tb)
    L = max(cone_a.apex_level, cone_b.apex_level) + 1
    C0 = history.bounds.C0
    margins = []
    for comp, profile, direction in ((history.u, history.data.u0, +1),
                                     (history.v, history.data.v0, -1)):
        dens = np.abs(comp[:L]) ** 2
        lhs = abs(lattice_cone_integral(dens, grid, cone_a) - lattice_cone_integral(dens, grid, cone_b))
        g = _shifted_initial(np.abs(profile) ** 2, grid, L, direction)
        omega = (lattice_cone_integral(g, grid, cone_a) + lattice_cone_integral(g, grid, cone_b)
                 - 2.0 * _intersection_integral(g, grid, xs, ts))
        rhs = C0 * q_factor(m, T) * meas + math.exp(m * T) * omega
        margins.append(lhs - rhs)
    return float(max(margins))


# -- full report -----------------------------------------------------------

def default_cones(grid: GridSpec, nlevels: int) -> tuple[int, int]:
    """Centre node and the tallest apex level leaving room for one-node shifts."""
    centre = (grid.nx - 1) // 2
    level = min(nlevels - 1, centre - 1, grid.nx - 2 - centre)
    return centre, max(level, 0)


def default_tail_checks(grid: GridSpec, nlevels: int) -> list[tuple[float, int]]:
    R = min(-grid.xmin, grid.xmax)
    checks = []
    for tau_level in {nlevels - 1, (nlevels - 1) // 2}:
        tau = tau_level * grid.dt
        if R <= tau:
            continue
        for f in (0.25, 0.5, 0.75):
            checks.append((tau + f * (R - tau), tau_level))
    return checks


def diagnose(history: RunHistory) -> DiagnosticsReport:
    grid = history.grid
    series = charge_series(history)
    centre, L = default_cones(grid, history.nlevels)
    increase = max(cone_charge_increase(history, L), cone_charge_increase(history, max(L // 2, 1)))
    margins = pointwise_bound_margins(history)
    tails = [tail_report(history, M, tl) for M, tl in default_tail_checks(grid, history.nlevels)]
    equi = []
    if L >= 2:
        a = ConeRegion(centre, L)
        for di, dk in ((1, 0), (-1, 0), (0, -1), (1, -1)):
            equi.append(equicontinuity_margin(history, a, ConeRegion(centre + di, L + dk)))
    short = history.nlevels < 3
    return DiagnosticsReport(
        charge_series=series,
        max_charge_drift=charge_drift(series),
        cone_violations=increase,
        pointwise_margin=float(np.nanmax(margins)),
        pointwise_skipped=int(np.isnan(margins).sum()),
        tail_margin=max(tails, default=float("nan")),
        gauge_sup_margin=gauge_sup_report(history),
        lorentz_residual=float("nan") if short else lorentz_residual(history),
        local_conservation_residual=float("nan") if short else local_conservation_residual(history),
        equicontinuity_margins=equi,
    )
