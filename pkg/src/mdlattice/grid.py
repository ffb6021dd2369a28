"""Uniform light-cone lattice with dt == dx, and backward-cone geometry on it."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

# relative slack when checking that lengths are integer multiples of dx
_COMMENSURATE_RTOL = 1e-9


class Boundary(str, Enum):
    ZERO_INFLOW = "zero-inflow"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class GridSpec:
    """Node lattice x_i = xmin + i*dx, t_k = k*dt with dt == dx.

    In periodic mode the last node duplicates the first (period xmax - xmin).
    """

    xmin: float
    xmax: float
    nx: int
    nt: int
    boundary: Boundary = Boundary.ZERO_INFLOW

    def __post_init__(self):
        if not self.xmax > self.xmin:
            raise ValueError(f"xmax ({self.xmax}) must exceed xmin ({self.xmin})")
        if self.nx < 3:
            raise ValueError(f"need at least 3 nodes, got nx={self.nx}")
        if self.nt < 0:
            raise ValueError(f"nt must be non-negative, got {self.nt}")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def dx(self) -> float:
        return (self.xmax - self.xmin) / (self.nx - 1)

    @property
    def dt(self) -> float:
        return self.dx

    @property
    def T(self) -> float:
        return self.nt * self.dt

    @property
    def x(self) -> np.ndarray:
        return self.xmin + self.dx * np.arange(self.nx)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.nt + 1)

    @property
    def periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC

    @property
    def n_unique(self) -> int:
        """Number of independent nodes (the periodic duplicate is excluded)."""
        return self.nx - 1 if self.periodic else self.nx

    def node_index(self, x: float) -> int:
        """Index of the node at coordinate ``x``; raises if x is not on a node."""
        s = (x - self.xmin) / self.dx
        i = int(round(s))
        if abs(s - i) > 1e-7 or not 0 <= i < self.nx:
            raise ValueError(f"x={x} is not a lattice node")
        return i

    def with_horizon(self, T: float) -> "GridSpec":
        return make_grid(self.xmin, self.xmax, self.dx, T, self.boundary)


def _as_steps(length: float, dx: float, what: str) -> int:
    n = length / dx
    k = int(round(n))
    if abs(n - k) > _COMMENSURATE_RTOL * max(1.0, abs(n)):
        raise ValueError(f"{what} ({length}) is not an integer multiple of dx={dx}")
    return k


def make_grid(xmin: float, xmax: float, dx: float, T: float,
              boundary: Boundary | str = Boundary.ZERO_INFLOW) -> GridSpec:
    if not dx > 0:
        raise ValueError(f"dx must be positive, got {dx}")
    if not xmax > xmin:
        raise ValueError(f"xmax ({xmax}) must exceed xmin ({xmin})")
    if T < 0:
        raise ValueError(f"T must be non-negative, got {T}")
    ncell = _as_steps(xmax - xmin, dx, "domain length")
    nt = _as_steps(T, dx, "horizon T")
    return GridSpec(float(xmin), float(xmax), ncell + 1, nt, Boundary(boundary))


@dataclass(frozen=True)
class ConeRegion:
    """Backward light cone with apex at node ``apex_index``, level ``apex_level``."""

    apex_index: int
    apex_level: int

    def __post_init__(self):
        if self.apex_level < 0:
            raise ValueError(f"apex_level must be >= 0, got {self.apex_level}")

    def fits(self, grid: GridSpec) -> bool:
        return (self.apex_index - self.apex_level >= 0
                and self.apex_index + self.apex_level <= grid.nx - 1)

    def apex(self, grid: GridSpec) -> tuple[float, float]:
        return grid.xmin + self.apex_index * grid.dx, self.apex_level * grid.dt


def make_cone(grid: GridSpec, apex_index: int, apex_level: int) -> ConeRegion:
    cone = ConeRegion(int(apex_index), int(apex_level))
    if not cone.fits(grid):
        raise ValueError(
            f"cone base of apex ({apex_index}, {apex_level}) leaves the window [0, {grid.nx - 1}]")
    return cone


def cone_slice(grid: GridSpec, cone: ConeRegion, level: int) -> tuple[int, int]:
    """Inclusive node interval of the cone cross-section at ``level``."""
    if not 0 <= level <= cone.apex_level:
        raise ValueError(f"level {level} outside [0, {cone.apex_level}]")
    half = cone.apex_level - level
    return cone.apex_index - half, cone.apex_index + half


def cone_intersection_apex(x0: float, t0: float, x1: float, t1: float) -> tuple[float, float]:
    """Apex of the backward cone equal to the intersection of two backward cones.

    The returned height is <= 0 when the cones do not overlap.
    """
    right = min(x0 + t0, x1 + t1)
    left = min(t0 - x0, t1 - x1)
    return 0.5 * (right - left), 0.5 * (right + left)


def symmetric_difference_area(x0: float, t0: float, x1: float, t1: float) -> float:
    _, ts = cone_intersection_apex(x0, t0, x1, t1)
    ts = max(ts, 0.0)
    return max(t0 * t0 + t1 * t1 - 2.0 * ts * ts, 0.0)


def symmetric_difference_measure(cone_a: ConeRegion, cone_b: ConeRegion, grid: GridSpec) -> float:
    """Area of the symmetric difference of two backward cones, in continuum coordinates."""
    for c in (cone_a, cone_b):
        if not c.fits(grid):
            raise ValueError(f"{c} does not fit in the grid")
    return symmetric_difference_area(*cone_a.apex(grid), *cone_b.apex(grid))

