"""Unit-CFL leapfrog for A_tt - A_xx = f, and a d'Alembert quadrature oracle.

At dt == dx the leapfrog stencil

    A[k+1, i] = A[k, i+1] + A[k, i-1] - A[k-1, i] + dt**2 f[k, i]

is exact for the homogeneous equation on the lattice (it carries F(x-t) +
G(x+t) without error), so the only discretisation is the midpoint rule on
each diamond cell of the source integral.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mdlattice.grid import GridSpec


@dataclass
class GaugeField:
    """Two consecutive levels of (A+, A-); ``level`` is the index of ``curr``."""

    aplus_curr: np.ndarray
    aminus_curr: np.ndarray
    aplus_prev: np.ndarray | None = None
    aminus_prev: np.ndarray | None = None
    level: int = 0

    def is_finite(self) -> bool:
        arrays = [self.aplus_curr, self.aminus_curr]
        if self.aplus_prev is not None:
            arrays += [self.aplus_prev, self.aminus_prev]
        return all(np.isfinite(a).all() for a in arrays)


def _check_lengths(grid: GridSpec, *arrays):
    for a in arrays:
        if np.shape(a) != (grid.nx,):
            raise ValueError(f"expected arrays of length {grid.nx}, got shape {np.shape(a)}")


def _neighbour_sum(a: np.ndarray, periodic: bool) -> np.ndarray:
    """a[i+1] + a[i-1] on interior nodes (and all unique nodes when periodic)."""
    s = np.zeros_like(a)
    if periodic:
        n = a.size - 1
        core = a[:n]
        s[:n] = np.roll(core, 1) + np.roll(core, -1)
        s[n] = s[0]
    else:
        s[1:-1] = a[2:] + a[:-2]
    return s


def first_step(a0, a1, source0, grid: GridSpec) -> np.ndarray:
    """Level-1 values from the second-order Taylor expansion in time."""
    a0, a1, source0 = (np.asarray(a, dtype=float) for a in (a0, a1, source0))
    _check_lengths(grid, a0, a1, source0)
    dt = grid.dt
    out = a0 + dt * a1 + 0.5 * dt * dt * source0
    nb = _neighbour_sum(a0, grid.periodic)
    if grid.periodic:
        out += 0.5 * (nb - 2.0 * a0)
    else:
        out[1:-1] += 0.5 * (nb[1:-1] - 2.0 * a0[1:-1])
        # one-sided second difference at the edges
        out[0] += 0.5 * (a0[0] - 2.0 * a0[1] + a0[2])
        out[-1] += 0.5 * (a0[-1] - 2.0 * a0[-2] + a0[-3])
    return out


def leapfrog_wave(prev, curr, source_curr, grid: GridSpec) -> np.ndarray:
    prev, curr, source_curr = (np.asarray(a, dtype=float) for a in (prev, curr, source_curr))
    _check_lengths(grid, prev, curr, source_curr)
    nxt = _neighbour_sum(curr, grid.periodic) - prev + grid.dt ** 2 * source_curr
    if not grid.periodic:
        # outgoing transport at the edges; runs are sized so nothing reaches them
        nxt[0] = curr[1]
        nxt[-1] = curr[-2]
    return nxt


def wave_residual(prev, curr, nxt, source_curr, grid: GridSpec) -> float:
    """Max interior defect of the leapfrog identity (zero up to rounding)."""
    d = (nxt[1:-1] - curr[2:] - curr[:-2] + prev[1:-1]
         - grid.dt ** 2 * np.asarray(source_curr)[1:-1])
    return float(np.max(np.abs(d))) if d.size else 0.0


def initial_gauge(aplus0, aminus0, aplus1, aminus1, u0, v0, grid: GridSpec) -> GaugeField:
    """Gauge state at level 1 (with level 0 as ``prev``)."""
    ap1 = first_step(aplus0, aplus1, np.abs(v0) ** 2, grid)
    am1 = first_step(aminus0, aminus1, np.abs(u0) ** 2, grid)
    return GaugeField(ap1, am1, np.asarray(aplus0, float).copy(), np.asarray(aminus0, float).copy(), level=1)


def advance_gauge(gauge: GaugeField, spinor, grid: GridSpec) -> GaugeField:
    """A+ is driven by |v|^2 and A- by |u|^2, both sampled at the current level."""
    if spinor.level != gauge.level:
        raise ValueError(f"spinor level {spinor.level} != gauge level {gauge.level}")
    if gauge.aplus_prev is None:
        raise ValueError("gauge has no previous level; build it with initial_gauge")
    ap = leapfrog_wave(gauge.aplus_prev, gauge.aplus_curr, np.abs(spinor.v) ** 2, grid)
    am = leapfrog_wave(gauge.aminus_prev, gauge.aminus_curr, np.abs(spinor.u) ** 2, grid)
    return GaugeField(ap, am, gauge.aplus_curr, gauge.aminus_curr, gauge.level + 1)


def _trapezoid(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(values.sum() - 0.5 * (values[0] + values[-1]))


def dalembert_eval(node: int, level: int, a0, a1, source_history, grid: GridSpec,
                   quadrature: str = "lattice") -> float:
    """Evaluate the d'Alembert solution at (x_node, t_level) by direct quadrature.

    A = (a0(x+t) + a0(x-t))/2 + (1/2) int a1 + (1/2) iint_cone f.

    ``quadrature="lattice"`` uses the checkerboard midpoint sums the leapfrog
    telescopes into (agreement to rounding); ``"trapezoid"`` uses trapezoid
    weights on every node (agreement to O(dx^2)).
    ``source_history[k]`` is f at level k; levels 0..level-1 are used.
    """
    a0 = np.asarray(a0, dtype=float)
    a1 = np.asarray(a1, dtype=float)
    n, i = int(level), int(node)
    if n < 0:
        raise ValueError("level must be non-negative")
    if i - n < 0 or i + n > grid.nx - 1:
        raise ValueError(f"backward cone of ({node}, {level}) exits the window")
    if n == 0:
        return float(a0[i])
    if len(source_history) < n:
        raise ValueError(f"need source levels 0..{n - 1}, got {len(source_history)}")
    h = grid.dx
    value = 0.5 * (a0[i + n] + a0[i - n])
    if quadrature == "lattice":
        value += h * a1[i - n + 1:i + n:2].sum()
        total = 0.0
        for k in range(n):
            w = n - k - 1
            f = np.asarray(source_history[k], dtype=float)
            s = f[i - w:i + w + 1:2].sum()
            total += 0.5 * s if k == 0 else s
        value += h * h * total
    elif quadrature == "trapezoid":
        value += 0.5 * h * _trapezoid(a1[i - n:i + n + 1])
        total = 0.0
        for k in range(n):
            w = n - k
            f = np.asarray(source_history[k], dtype=float)
            s = _trapezoid(f[i - w:i + w + 1])
            total += 0.5 * s if k == 0 else s
        value += 0.5 * h * h * total
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    return float(value)
