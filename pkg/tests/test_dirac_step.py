import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from mdlattice.dirac_step import (SpinorField, SpinorStepConfig, gauge_phase, mass_rotation, step_spinor,
                                  transport, unstep_spinor)
from mdlattice.grid import Boundary, make_grid
from mdlattice.wave_step import GaugeField

reals = st.floats(-50, 50, allow_nan=False)


def frozen_gauge(ap_prev, am_prev, ap, am, level):
    return GaugeField(np.asarray(ap, float), np.asarray(am, float),
                      np.asarray(ap_prev, float), np.asarray(am_prev, float), level)


def random_gauge(r, grid, scale=1.0, level=1):
    arrays = [scale * r.normal(size=grid.nx) for _ in range(4)]
    if grid.periodic:
        for a in arrays:
            a[-1] = a[0]
    return frozen_gauge(*arrays, level=level)


def random_spinor(r, grid, support=None):
    n = grid.nx
    u = r.normal(size=n) + 1j * r.normal(size=n)
    v = r.normal(size=n) + 1j * r.normal(size=n)
    if grid.periodic:
        u[-1], v[-1] = u[0], v[0]
    if support is not None:
        u[~support] = 0
        v[~support] = 0
    return SpinorField(u, v, 0)


def test_mass_rotation_examples():
    u, v = np.array([1 + 2j, -0.5]), np.array([0.3j, 4.0])
    uu, vv = mass_rotation(u, v, 0.0, 0.7)
    np.testing.assert_array_equal(uu, u)
    np.testing.assert_array_equal(vv, v)
    uu, vv = mass_rotation(1.0, 0.0, 1.0, math.pi / 2)
    assert abs(uu) < 1e-15 and abs(vv - 1j) < 1e-15


@given(reals, reals, reals, reals, st.floats(0, 10), st.floats(1e-4, 1.0))
def test_mass_rotation_is_unitary_and_exact(a, b, c, d, m, dt):
    u, v = complex(a, b), complex(c, d)
    uu, vv = mass_rotation(u, v, m, dt)
    n0 = abs(u) ** 2 + abs(v) ** 2
    assert abs(abs(uu) ** 2 + abs(vv) ** 2 - n0) <= 1e-13 * max(n0, 1.0)
    ref = expm(1j * m * dt * np.array([[0, 1], [1, 0]])) @ np.array([u, v])
    assert abs(uu - ref[0]) + abs(vv - ref[1]) <= 1e-12 * max(abs(u) + abs(v), 1.0)


def test_gauge_phase_examples():
    w = np.array([1 + 1j, -2.0, 0.5j])
    np.testing.assert_array_equal(gauge_phase(w, 0.0, 0.1), w)
    assert abs(gauge_phase(1.0, math.pi, 1.0) + 1) < 1e-15


@given(reals, reals, reals, st.floats(0, 1))
def test_gauge_phase_keeps_modulus(a, b, A, dt):
    w = complex(a, b)
    assert abs(abs(gauge_phase(w, A, dt)) - abs(w)) <= 1e-13 * max(abs(w), 1.0)


def test_transport_zero_inflow_and_periodic():
    u = np.arange(1, 6, dtype=complex)
    v = 10 * u
    un, vn = transport(u, v, Boundary.ZERO_INFLOW)
    np.testing.assert_array_equal(un, [0, 1, 2, 3, 4])
    np.testing.assert_array_equal(vn, [20, 30, 40, 50, 0])
    up = np.array([1, 2, 3, 4, 1], complex)
    un, vn = transport(up, up, Boundary.PERIODIC)
    np.testing.assert_array_equal(un, [4, 1, 2, 3, 4])
    np.testing.assert_array_equal(vn, [2, 3, 4, 1, 2])


def test_pure_transport_is_an_index_shift(rng):
    grid = make_grid(-1, 1, 2.0 ** -5, 0.5)
    s = random_spinor(rng, grid)
    z = np.zeros(grid.nx)
    out = step_spinor(s, frozen_gauge(z, z, z, z, 1), grid, SpinorStepConfig(m=0.0))
    np.testing.assert_array_equal(out.u[1:], s.u[:-1])
    np.testing.assert_array_equal(out.v[:-1], s.v[1:])
    assert out.u[0] == 0 and out.v[-1] == 0 and out.level == 1


def test_uniform_periodic_rotation_closed_form():
    grid = make_grid(0, 1, 2.0 ** -6, 1.0, "periodic")
    one = np.ones(grid.nx)
    z = np.zeros(grid.nx)
    s = SpinorField(one, z, 0)
    cfg = SpinorStepConfig(m=1.0, boundary="periodic")
    for k in range(grid.nt):
        s = step_spinor(s, frozen_gauge(z, z, z, z, k + 1), grid, cfg)
        t = (k + 1) * grid.dt
        np.testing.assert_allclose(s.u, math.cos(t), atol=1e-13, rtol=0)
        np.testing.assert_allclose(s.v, 1j * math.sin(t), atol=1e-13, rtol=0)


def _uniform_error(dt, m=1.3, a=0.9, b=-0.6, T=1.0):
    # constant external gauge, uniform data: the local ODE has a closed form
    grid = make_grid(0, 1, dt, T, "periodic")
    n = grid.nx
    ap, am = np.full(n, a), np.full(n, b)
    s = SpinorField(np.full(n, 0.6 + 0.2j), np.full(n, -0.3j), 0)
    cfg = SpinorStepConfig(m=m, boundary="periodic")
    for k in range(grid.nt):
        s = step_spinor(s, frozen_gauge(ap, am, ap, am, k + 1), grid, cfg)
    exact = expm(1j * T * np.array([[a, m], [m, b]])) @ np.array([0.6 + 0.2j, -0.3j])
    return max(abs(s.u[0] - exact[0]), abs(s.v[0] - exact[1]))


def test_second_order_against_uniform_closed_form():
    errs = [_uniform_error(2.0 ** -j) for j in range(4, 9)]
    orders = [math.log2(e1 / e2) for e1, e2 in zip(errs, errs[1:])]
    assert min(orders) >= 1.9, orders


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 2 ** 31), st.floats(0, 3), st.sampled_from(["periodic", "zero-inflow"]))
def test_step_conserves_charge(seed, m, boundary):
    r = np.random.default_rng(seed)
    grid = make_grid(-1, 1, 2.0 ** -5, 0.5, boundary)
    support = np.abs(grid.x) < 0.5
    s = random_spinor(r, grid, None if grid.periodic else support)
    n0 = s.density[:grid.n_unique].sum()
    out = step_spinor(s, random_gauge(r, grid, 3.0), grid, SpinorStepConfig(m=m, boundary=boundary))
    assert abs(out.density[:grid.n_unique].sum() - n0) <= 1e-13 * n0


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 2 ** 31), st.floats(0, 3), st.sampled_from(["periodic", "zero-inflow"]))
def test_step_is_reversible(seed, m, boundary):
    r = np.random.default_rng(seed)
    grid = make_grid(-1, 1, 2.0 ** -5, 0.5, boundary)
    s = random_spinor(r, grid, None if grid.periodic else np.abs(grid.x) < 0.9)
    g = random_gauge(r, grid)
    cfg = SpinorStepConfig(m=m, boundary=boundary)
    back = unstep_spinor(step_spinor(s, g, grid, cfg), g, grid, cfg)
    assert back.level == 0
    np.testing.assert_allclose(back.u, s.u, atol=1e-12, rtol=0)
    np.testing.assert_allclose(back.v, s.v, atol=1e-12, rtol=0)


@settings(deadline=None, max_examples=20)
@given(st.integers(0, 2 ** 31))
def test_massless_moduli_are_transported(seed):
    r = np.random.default_rng(seed)
    grid = make_grid(-1, 1, 2.0 ** -5, 0.5)
    s0 = random_spinor(r, grid)
    s = s0
    cfg = SpinorStepConfig(m=0.0)
    for k in range(grid.nt):
        s = step_spinor(s, random_gauge(r, grid, 5.0, k + 1), grid, cfg)
    n = grid.nt
    np.testing.assert_allclose(np.abs(s.u[n:]), np.abs(s0.u[:-n]), atol=1e-12, rtol=0)
    np.testing.assert_allclose(np.abs(s.v[:-n]), np.abs(s0.v[n:]), atol=1e-12, rtol=0)


def test_level_mismatch_and_bad_config():
    grid = make_grid(-1, 1, 0.25, 0.5)
    z = np.zeros(grid.nx)
    s = SpinorField(z, z, 3)
    with pytest.raises(ValueError):
        step_spinor(s, frozen_gauge(z, z, z, z, 3), grid, SpinorStepConfig())
    with pytest.raises(ValueError):
        step_spinor(s, GaugeField(z, z, level=4), grid, SpinorStepConfig())
    with pytest.raises(ValueError):
        SpinorStepConfig(m=-1.0)
    with pytest.raises(ValueError):
        SpinorField(z, np.zeros(3))


def test_rotation_gain_breaks_conservation(rng):
    grid = make_grid(0, 1, 2.0 ** -5, 0.5, "periodic")
    s = random_spinor(rng, grid)
    z = np.zeros(grid.nx)
    out = step_spinor(s, frozen_gauge(z, z, z, z, 1), grid,
                      SpinorStepConfig(m=1.0, boundary="periodic", rotation_gain=1 + 1e-3))
    ratio = out.density[:-1].sum() / s.density[:-1].sum()
    assert ratio == pytest.approx((1 + 1e-3) ** 4, rel=1e-12)
