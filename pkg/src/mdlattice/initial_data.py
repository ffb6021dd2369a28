"""Initial data (u0, v0, a+-^0, a+-^1): construction, change of variables, mollification."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

from mdlattice.grid import GridSpec

CSV_COLUMNS = ("x", "re_u0", "im_u0", "re_v0", "im_v0", "aplus0", "aplus1", "aminus0", "aminus1")
PRESETS = ("zero", "gaussian_packet", "box", "uniform")


@dataclass
class InitialData:
    u0: np.ndarray
    v0: np.ndarray
    aplus0: np.ndarray
    aplus1: np.ndarray
    aminus0: np.ndarray
    aminus1: np.ndarray

    def __post_init__(self):
        self.u0 = np.asarray(self.u0, dtype=complex)
        self.v0 = np.asarray(self.v0, dtype=complex)
        for name in ("aplus0", "aplus1", "aminus0", "aminus1"):
            a = np.asarray(getattr(self, name))
            if np.iscomplexobj(a):
                raise TypeError(f"{name} must be real")
            setattr(self, name, a.astype(float))
        shapes = {getattr(self, f.name).shape for f in fields(self)}
        if len(shapes) != 1 or len(next(iter(shapes))) != 1:
            raise ValueError(f"all components must be 1-D arrays of one length, got {shapes}")
        for f in fields(self):
            if not np.isfinite(getattr(self, f.name)).all():
                raise ValueError(f"{f.name} has non-finite entries")

    @property
    def nx(self) -> int:
        return self.u0.size

    @property
    def gauge_arrays(self) -> tuple[np.ndarray, ...]:
        return self.aplus0, self.aplus1, self.aminus0, self.aminus1

    @classmethod
    def zeros(cls, nx: int) -> "InitialData":
        z = np.zeros(nx)
        return cls(z, z, z, z, z, z)

    def combine(self, other: "InitialData", delta: float) -> "InitialData":
        """self + delta * other, componentwise."""
        return InitialData(*(getattr(self, f.name) + delta * getattr(other, f.name)
                             for f in fields(self)))

    def phase_rotated(self, theta: float) -> "InitialData":
        z = np.exp(1j * theta)
        return InitialData(z * self.u0, z * self.v0, *self.gauge_arrays)


@dataclass(frozen=True)
class DataBounds:
    C0: float
    C1: float


def line_integral(density: np.ndarray, grid: GridSpec) -> float:
    """Sum over independent nodes times dx.

    Equals the trapezoid rule when the edge values vanish, and the periodic
    trapezoid rule on periodic grids.
    """
    return float(np.sum(density[:grid.n_unique]) * grid.dx)


def charge(u: np.ndarray, v: np.ndarray, grid: GridSpec) -> float:
    return line_integral(np.abs(u) ** 2 + np.abs(v) ** 2, grid)


def _same_length(*arrays):
    if len({np.shape(a) for a in arrays}) != 1:
        raise ValueError("all arrays must have the same length")


def from_psi(psi1, psi2, a0_0, a0_1, a1_0, a1_1) -> InitialData:
    """Map (psi, a_nu^j) to (u0, v0, a+-^j).

    ``a0_0`` is a^0_0 (value of A_0), ``a0_1`` is a^0_1 (value of A_1),
    ``a1_0`` and ``a1_1`` are the corresponding time derivatives.
    """
    _same_length(psi1, psi2, a0_0, a0_1, a1_0, a1_1)
    psi1, psi2 = np.asarray(psi1, complex), np.asarray(psi2, complex)
    a0_0, a0_1, a1_0, a1_1 = (np.asarray(a, float) for a in (a0_0, a0_1, a1_0, a1_1))
    return InitialData(psi1 + psi2, psi1 - psi2,
                       a0_0 + a0_1, a1_0 + a1_1,
                       a0_0 - a0_1, a1_0 - a1_1)


def to_psi(u, v, aplus, aminus):
    """Inverse substitution: returns (psi1, psi2, A0, A1)."""
    _same_length(u, v, aplus, aminus)
    u, v = np.asarray(u, complex), np.asarray(v, complex)
    aplus, aminus = np.asarray(aplus, float), np.asarray(aminus, float)
    return 0.5 * (u + v), 0.5 * (u - v), 0.5 * (aplus + aminus), 0.5 * (aplus - aminus)


def constraint_residual(data: InitialData, grid: GridSpec, include_boundary: bool = False) -> float:
    """max |a^1_0 - d/dx a^0_1| with centred differences.

    With ``include_boundary`` the two edge nodes are checked too, using
    one-sided second-order differences.
    """
    if grid.nx < 3 or data.nx != grid.nx:
        raise ValueError("constraint residual needs data on a grid with nx >= 3")
    a1_0 = 0.5 * (data.aplus1 + data.aminus1)
    a0_1 = 0.5 * (data.aplus0 - data.aminus0)
    r = np.abs(a1_0 - np.gradient(a0_1, grid.dx, edge_order=2))
    if not include_boundary:
        r = r[1:-1]
    return float(r.max())


def with_lorentz_gauge(data: InitialData, grid: GridSpec) -> InitialData:
    """Replace the gauge time derivatives so the Lorentz condition propagates.

    Sets a^1_0 = d/dx a^0_1 and d/dx a^1_1 = d2/dx2 a^0_0 + (|u0|^2 + |v0|^2)/2.
    The second relation (Gauss's law) is what makes d/dt of the gauge
    condition vanish initially; without it the condition is not preserved.
    """
    a0_0 = 0.5 * (data.aplus0 + data.aminus0)
    a0_1 = 0.5 * (data.aplus0 - data.aminus0)
    rho = 0.5 * (np.abs(data.u0) ** 2 + np.abs(data.v0) ** 2)
    cum = cumulative_trapezoid(rho, dx=grid.dx, initial=0.0)
    a1_0 = np.gradient(a0_1, grid.dx, edge_order=2)
    a1_1 = np.gradient(a0_0, grid.dx, edge_order=2) + cum - 0.5 * cum[-1]
    return InitialData(data.u0, data.v0, data.aplus0, a1_0 + a1_1, data.aminus0, a1_0 - a1_1)


def compute_bounds(data: InitialData, grid: GridSpec) -> DataBounds:
    """C0 is the discrete charge; C1 sums the sup norms of a^0_0, a^0_1, a^1_0, a^1_1."""
    C0 = charge(data.u0, data.v0, grid)
    _, _, a00, a01 = to_psi(data.u0, data.v0, data.aplus0, data.aminus0)
    _, _, a10, a11 = to_psi(data.u0, data.v0, data.aplus1, data.aminus1)
    C1 = float(sum(np.max(np.abs(a)) for a in (a00, a01, a10, a11)))
    return DataBounds(C0, C1)


def support_radius(data: InitialData, grid: GridSpec, center: float = 0.0,
                   rel_tol: float = 1e-13) -> float:
    """Largest |x - center| where the spinor data exceed rel_tol * their peak."""
    amp = np.maximum(np.abs(data.u0), np.abs(data.v0))
    peak = amp.max()
    if peak == 0:
        return 0.0
    mask = amp > rel_tol * peak
    return float(np.max(np.abs(grid.x[mask] - center)))


# -- mollification ---------------------------------------------------------

def bump_kernel(radius: float, dx: float) -> np.ndarray:
    """exp(-1/(1-s^2)) sampled on |j dx| < radius, normalised to unit sum."""
    r = math.ceil(radius / dx - 1e-12) - 1
    s = np.arange(-r, r + 1) * dx / radius
    k = np.exp(-1.0 / (1.0 - s * s))
    return k / k.sum()


def _smoothstep(s: np.ndarray) -> np.ndarray:
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def window_cutoff(grid: GridSpec, eps: float) -> np.ndarray:
    """Smooth, 0 within eps of either edge and 1 farther than 2*eps from both."""
    x = grid.x
    return (_smoothstep((x - grid.xmin - eps) / eps)
            * _smoothstep((grid.xmax - eps - x) / eps))


def _convolve(f: np.ndarray, kernel: np.ndarray, grid: GridSpec) -> np.ndarray:
    if not grid.periodic:
        return np.convolve(f, kernel, mode="same")
    n = grid.n_unique
    r = kernel.size // 2
    if 2 * r + 1 > n:
        raise ValueError(f"kernel of {2 * r + 1} nodes is longer than the period ({n} nodes)")
    core = f[:n]
    padded = np.concatenate([core[n - r:], core, core[:r]]) if r else core
    out = np.empty_like(f)
    out[:n] = np.convolve(padded, kernel, mode="valid")
    out[n] = out[0]
    return out


def mollify(data: InitialData, n: int, grid: GridSpec) -> InitialData:
    """Convolve with a unit-mass bump of radius 1/n, then cut off near the window edges.

    Periodic grids are convolved circularly and not cut off.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    eps = 1.0 / n
    if eps < 2 * grid.dx:
        raise ValueError(f"kernel radius 1/{n} is below 2*dx={2 * grid.dx}")
    kernel = bump_kernel(eps, grid.dx)
    cut = 1.0 if grid.periodic else window_cutoff(grid, eps)
    if not grid.periodic and 4 * eps >= grid.xmax - grid.xmin:
        raise ValueError(f"window too short for cutoff at n={n}")
    return InitialData(*(cut * _convolve(getattr(data, f.name), kernel, grid) for f in fields(data)))


# -- presets ---------------------------------------------------------------

def _periodic_fix(data: InitialData, grid: GridSpec) -> InitialData:
    if grid.periodic:
        for f in fields(data):
            a = getattr(data, f.name)
            a[-1] = a[0]
    return data


def _gaussian(x, center, width):
    return np.exp(-((x - center) ** 2) / (2.0 * width * width))


def preset(name: str, grid: GridSpec, **params) -> InitialData:
    """Sampled initial data.

    gaussian_packet: u_amp, v_amp, center, width, momentum, v_center, and
        gauge bump amplitudes aplus0, aplus1, aminus0, aminus1 with gauge_width.
    box: height, width, center, component ("u", "v" or "both").
    uniform: u, v (complex constants), aplus0, aplus1, aminus0, aminus1.
    """
    x = grid.x
    nx = grid.nx
    take = dict(params)

    def pop(key, default):
        return take.pop(key, default)

    if name == "zero":
        data = InitialData.zeros(nx)
    elif name == "gaussian_packet":
        amp = float(pop("amplitude", 1.0))
        u_amp = amp * float(pop("u_amp", 1.0))
        v_amp = amp * float(pop("v_amp", 0.0))
        center = float(pop("center", 0.0))
        v_center = float(pop("v_center", center))
        width = float(pop("width", 0.25))
        k = float(pop("momentum", 0.0))
        gw = float(pop("gauge_width", 1.0))
        if width <= 0 or gw <= 0:
            raise ValueError("gaussian widths must be positive")
        phase = np.exp(1j * k * x)
        g = _gaussian(x, 0.0, gw)
        data = InitialData(u_amp * _gaussian(x, center, width) * phase,
                           v_amp * _gaussian(x, v_center, width) * phase,
                           float(pop("aplus0", 0.0)) * g, float(pop("aplus1", 0.0)) * g,
                           float(pop("aminus0", 0.0)) * g, float(pop("aminus1", 0.0)) * g)
    elif name == "box":
        h = float(pop("height", 1.0))
        w = float(pop("width", 1.0))
        c = float(pop("center", 0.0))
        comp = pop("component", "u")
        if w <= 0:
            raise ValueError("box width must be positive")
        if comp not in ("u", "v", "both"):
            raise ValueError(f"box component must be u, v or both, got {comp!r}")
        slack = 1e-9 * grid.dx
        ind = h * ((x >= c - 0.5 * w - slack) & (x < c + 0.5 * w - slack))
        z = np.zeros(nx)
        data = InitialData(ind if comp in ("u", "both") else z,
                           ind if comp in ("v", "both") else z, z, z, z, z)
    elif name == "uniform":
        one = np.ones(nx)
        data = InitialData(complex(pop("u", 1.0)) * one, complex(pop("v", 0.0)) * one,
                           float(pop("aplus0", 0.0)) * one, float(pop("aplus1", 0.0)) * one,
                           float(pop("aminus0", 0.0)) * one, float(pop("aminus1", 0.0)) * one)
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    if take:
        raise ValueError(f"unknown parameters for preset {name!r}: {sorted(take)}")
    return _periodic_fix(data, grid)


# -- CSV -------------------------------------------------------------------

def write_csv(path: str | Path, data: InitialData, grid: GridSpec) -> None:
    cols = np.column_stack([grid.x, data.u0.real, data.u0.imag, data.v0.real, data.v0.imag,
                            data.aplus0, data.aplus1, data.aminus0, data.aminus1])
    np.savetxt(path, cols, delimiter=",", header=",".join(CSV_COLUMNS), comments="", fmt="%.17g")


def read_csv(path: str | Path) -> tuple[np.ndarray, InitialData]:
    """Read initial data; returns the node coordinates and the data."""
    with open(path) as fh:
        header = None
        for line in fh:
            if line.strip() and not line.startswith("#"):
                header = [c.strip() for c in line.split(",")]
                break
        if header != list(CSV_COLUMNS):
            raise ValueError(f"expected columns {CSV_COLUMNS}, got {header}")
        arr = np.loadtxt(fh, delimiter=",", comments="#", ndmin=2)
    if arr.shape[1] != len(CSV_COLUMNS):
        raise ValueError(f"expected {len(CSV_COLUMNS)} columns, got {arr.shape[1]}")
    x = arr[:, 0]
    data = InitialData(arr[:, 1] + 1j * arr[:, 2], arr[:, 3] + 1j * arr[:, 4],
                       arr[:, 5], arr[:, 6], arr[:, 7], arr[:, 8])
    return x, data
