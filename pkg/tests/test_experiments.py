import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from mdlattice.experiments import (ConvergenceTable, NumericalError, WindowError, build_data, check_window,
                                   convergence_study, gauge_data_gap, iter_levels, mollification_study,
                                   run_sampled, run_simulation, stability_study)
from mdlattice.grid import make_grid
from mdlattice.initial_data import InitialData, preset
from mdlattice.wave_step import dalembert_eval

from conftest import GAUSS, PERTURB


def test_zero_data_gives_zero_history():
    grid = make_grid(-1, 1, 2.0 ** -5, 0.5)
    h = run_simulation(preset("zero", grid), grid, 1.0)
    for a in (h.u, h.v, h.aplus, h.aminus):
        assert np.all(a == 0)
    assert h.nlevels == grid.nt + 1


def test_massless_box_transport_and_gauge():
    grid = make_grid(-2, 2, 2.0 ** -5, 1.0)
    data = preset("box", grid, width=0.5, center=-0.25, component="u")
    h = run_simulation(data, grid, 0.0)
    for k in range(grid.nt + 1):
        np.testing.assert_array_equal(np.abs(h.u[k, k:]), np.abs(data.u0[:grid.nx - k]))
    assert np.all(h.v == 0) and np.all(h.aplus == 0)
    sources = [np.abs(h.u[k]) ** 2 for k in range(grid.nt)]
    z = np.zeros(grid.nx)
    for k in (1, grid.nt // 2, grid.nt):
        for i in range(k, grid.nx - k, 7):
            assert h.aminus[k, i] == pytest.approx(dalembert_eval(i, k, z, z, sources, grid), abs=1e-13)
    assert h.aminus.max() > 0


def _uniform_reference(T, m, u0, v0):
    def rhs(t, y):
        u, v = y[0] + 1j * y[1], y[2] + 1j * y[3]
        ap, dap, am, dam = y[4:]
        du = 1j * m * v + 1j * ap * u
        dv = 1j * m * u + 1j * am * v
        return [du.real, du.imag, dv.real, dv.imag, dap, abs(v) ** 2, dam, abs(u) ** 2]

    sol = solve_ivp(rhs, (0, T), [u0.real, u0.imag, v0.real, v0.imag, 0, 0, 0, 0], rtol=1e-12, atol=1e-13)
    y = sol.y[:, -1]
    return y[0] + 1j * y[1], y[2] + 1j * y[3], y[4], y[6]


def test_uniform_periodic_coupled_run_is_second_order():
    u0, v0, m, T = 0.8 + 0.1j, 0.3j, 1.0, 1.0
    ref = _uniform_reference(T, m, u0, v0)
    errs = []
    for j in range(4, 9):
        grid = make_grid(0, 1, 2.0 ** -j, T, "periodic")
        h = run_simulation(preset("uniform", grid, u=u0, v=v0), grid, m)
        for a in (h.u, h.v, h.aplus, h.aminus):
            assert np.ptp(a[-1].real) < 1e-12 and np.ptp(a[-1].imag) < 1e-12
        errs.append(max(abs(h.u[-1, 0] - ref[0]), abs(h.v[-1, 0] - ref[1]),
                        abs(h.aplus[-1, 0] - ref[2]), abs(h.aminus[-1, 0] - ref[3])))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert errs[-1] < 1e-4 and min(orders) >= 1.9, (errs, orders)


def test_uniform_massless_run_only_changes_phase():
    # A- grows like t^2/2 from |u|^2 = 1; with m = 0 and v = 0 only the phase of u evolves
    grid = make_grid(0, 1, 2.0 ** -6, 1.0, "periodic")
    h = run_simulation(preset("uniform", grid, u=1.0), grid, 0.0)
    np.testing.assert_allclose(np.abs(h.u), 1.0, rtol=1e-14)
    np.testing.assert_allclose(h.aminus[:, 0], 0.5 * grid.t ** 2, rtol=1e-12, atol=1e-15)
    assert np.all(h.aplus == 0)


def test_window_check():
    grid = make_grid(-2, 2, 2.0 ** -5, 1.0)
    wide = preset("box", grid, width=2.5)
    with pytest.raises(WindowError):
        check_window(wide, grid)
    with pytest.raises(WindowError):
        run_simulation(wide, grid, 1.0)
    check_window(preset("box", grid, width=1.5), grid)
    check_window(preset("zero", grid), grid)
    run_simulation(wide, grid, 1.0, check=False)


def test_nonfinite_values_raise():
    grid = make_grid(-2, 2, 2.0 ** -5, 0.5)
    data = preset("box", grid, width=0.5, height=1e200)
    with pytest.raises(NumericalError) as exc:
        run_simulation(data, grid, 1.0)
    assert exc.value.level >= 1


def test_iter_levels_matches_run_and_sampling():
    grid = make_grid(-4, 4, 2.0 ** -5, 1.0)
    data = preset("gaussian_packet", grid, **GAUSS)
    h = run_simulation(data, grid, 1.0)
    for k, (s, ap, am) in enumerate(iter_levels(data, grid, 1.0)):
        assert s.level == k
        np.testing.assert_array_equal(s.u, h.u[k])
        np.testing.assert_array_equal(ap, h.aplus[k])
    u, v, ap, am = run_sampled(data, grid, 1.0, 4)
    np.testing.assert_array_equal(u, h.u[::4])
    np.testing.assert_array_equal(am, h.aminus[::4])
    with pytest.raises(ValueError):
        next(iter_levels(InitialData.zeros(5), grid, 1.0))


def test_build_data():
    grid = make_grid(-4, 4, 2.0 ** -5, 1.0)
    a = build_data({"preset": "gaussian_packet", **GAUSS}, grid)
    b = build_data(lambda g: preset("gaussian_packet", g, **GAUSS), grid)
    np.testing.assert_array_equal(a.u0, b.u0)
    c = build_data({"preset": "gaussian_packet", "lorentz_gauge": True, **GAUSS}, grid)
    assert not np.array_equal(c.aplus1, a.aplus1)


def test_convergence_zero_and_validation():
    t = convergence_study({"preset": "zero"}, [2.0 ** -4, 2.0 ** -5, 2.0 ** -6], 0.5, 1.0, -1, 1)
    assert np.all(t.distance_uv == 0) and np.all(t.distance_gauge == 0)
    with pytest.raises(ValueError):
        convergence_study({"preset": "zero"}, [2.0 ** -4, 2.0 ** -6], 0.5, 1.0, -1, 1)
    with pytest.raises(ValueError):
        convergence_study({"preset": "zero"}, [2.0 ** -4], 0.5, 1.0, -1, 1)


def test_convergence_smooth_order():
    spec = {"preset": "gaussian_packet", **GAUSS}
    t = convergence_study(spec, [2.0 ** -5, 2.0 ** -6, 2.0 ** -7, 2.0 ** -8], 1.0, 1.0, -4, 4)
    assert np.all(t.order_uv[1:] >= 1.9) and np.all(t.order_gauge[1:] >= 1.9)
    np.testing.assert_allclose(t.ratios, 2.0)


def test_convergence_box_strictly_decreasing():
    spec = {"preset": "box", "width": 0.5, "component": "both"}
    t = convergence_study(spec, [2.0 ** -5, 2.0 ** -6, 2.0 ** -7, 2.0 ** -8], 0.5, 1.0, -2, 2)
    assert np.all(np.diff(t.distance_uv) < 0)


def test_convergence_parallel_matches_serial():
    spec = {"preset": "gaussian_packet", **GAUSS}
    dxs = [2.0 ** -4, 2.0 ** -5, 2.0 ** -6]
    a = convergence_study(spec, dxs, 1.0, 1.0, -4, 4, workers=1)
    b = convergence_study(spec, dxs, 1.0, 1.0, -4, 4, workers=3)
    np.testing.assert_array_equal(a.distance_uv, b.distance_uv)
    np.testing.assert_array_equal(a.distance_gauge, b.distance_gauge)


def test_convergence_invariant_under_global_phase():
    dxs = [2.0 ** -4, 2.0 ** -5, 2.0 ** -6]
    a = convergence_study(lambda g: preset("gaussian_packet", g, **GAUSS), dxs, 1.0, 1.0, -4, 4)
    b = convergence_study(lambda g: preset("gaussian_packet", g, **GAUSS).phase_rotated(1.1), dxs, 1.0, 1.0, -4, 4)
    np.testing.assert_allclose(a.distance_uv, b.distance_uv, rtol=1e-9)
    np.testing.assert_allclose(a.distance_gauge, b.distance_gauge, rtol=1e-9)


def test_convergence_table_csv(tmp_path):
    t = ConvergenceTable("dx", np.array([0.1, 0.05, 0.025]), np.array([4.0, 1.0, 0.25]), np.array([2.0, 1.0, 0.5]))
    np.testing.assert_allclose(t.order_uv[1:], 2.0)
    np.testing.assert_allclose(t.order_gauge[1:], 1.0)
    assert math.isnan(t.order_uv[0])
    t.to_csv(tmp_path / "c.csv", "hello")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "# hello" and lines[1].startswith("dx,distance_uv")
    assert len(lines) == 5


def test_mollification_zero_and_smooth():
    grid = make_grid(-4, 4, 2.0 ** -8, 0.5)
    t = mollification_study(preset("zero", grid), [4, 8, 16], grid, 1.0)
    assert np.all(t.distance_uv == 0)
    smooth = preset("gaussian_packet", grid, u_amp=1.0, v_amp=0.5, width=0.3)
    ts = mollification_study(smooth, [4, 8, 16, 32], grid, 1.0)
    assert np.all(np.diff(ts.distance_uv) < 0)
    rough = mollification_study(preset("box", grid, width=1.0), [4, 8, 16, 32], grid, 1.0)
    # smooth data mollify faster than a jump
    assert ts.distance_uv[-1] < 0.1 * rough.distance_uv[-1]
    with pytest.raises(ValueError):
        mollification_study(smooth, [8, 4], grid, 1.0)


def test_stability_zero_delta_is_exactly_zero():
    grid = make_grid(-4, 4, 2.0 ** -6, 1.0)
    data = preset("gaussian_packet", grid, **GAUSS)
    tr = stability_study(data, 0.0, preset("gaussian_packet", grid, **PERTURB), grid, 1.0)
    assert np.all(tr.I == 0.0) and tr.envelope_margin <= 0 and tr.g_T == 0.0


def test_stability_quadratic_scaling_and_envelope():
    grid = make_grid(-4, 4, 2.0 ** -6, 1.0)
    data = preset("gaussian_packet", grid, **GAUSS)
    pert = preset("gaussian_packet", grid, **PERTURB)
    ratios = []
    for d in (1e-2, 1e-3, 1e-4):
        tr = stability_study(data, d, pert, grid, 1.0)
        assert np.all(tr.I >= 0)
        assert tr.envelope_margin <= 1e-10
        ratios.append(tr.I.max() / d ** 2)
    assert max(ratios) <= 1.1 * min(ratios)


def test_stability_gauge_only_perturbation():
    grid = make_grid(-4, 4, 2.0 ** -6, 1.0)
    data = preset("gaussian_packet", grid, **GAUSS)
    z = np.zeros(grid.nx)
    x = grid.x
    pert = InitialData(z, z, np.exp(-x ** 2), z, z, 0.5 * np.exp(-x ** 2))
    tr = stability_study(data, 1e-2, pert, grid, 1.0)
    assert tr.I[0] == 0.0 and tr.g_T > 0
    assert tr.I.max() > 0
    assert tr.envelope_margin <= 1e-10
    assert gauge_data_gap(data, data.combine(pert, 1e-2), grid) == pytest.approx(tr.g_T)


def test_fitted_growth_not_decreasing_in_horizon():
    Cs = []
    for T in (0.5, 1.0, 2.0):
        grid = make_grid(-5, 5, 2.0 ** -6, T)
        data = preset("gaussian_packet", grid, **GAUSS)
        tr = stability_study(data, 1e-3, preset("gaussian_packet", grid, **PERTURB), grid, 1.0)
        Cs.append(tr.fitted_C)
    assert all(b >= a for a, b in zip(Cs, Cs[1:])), Cs


def test_stability_validation(tmp_path):
    grid = make_grid(-4, 4, 2.0 ** -5, 1.0)
    data = preset("gaussian_packet", grid, **GAUSS)
    with pytest.raises(ValueError):
        stability_study(data, -1.0, data, grid, 1.0)
    with pytest.raises(WindowError):
        stability_study(data, 0.1, data, grid, 1.0, centre=3.5)
    tr = stability_study(data, 1e-3, preset("gaussian_packet", grid, **PERTURB), grid, 1.0)
    tr.to_csv(tmp_path / "s.csv", "c")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[2] == "level,t,I,envelope" and len(lines) == 3 + grid.nt + 1


def test_convergence_on_periodic_grid():
    # no gauge bump: it is centred at 0 and would not be periodic on [0, 1]
    spec = dict(preset="gaussian_packet", center=0.5, width=0.08, u_amp=1.0, v_amp=0.5)
    table = convergence_study(spec, [2.0 ** -5, 2.0 ** -6, 2.0 ** -7, 2.0 ** -8], 0.5, 1.0,
                              0.0, 1.0, "periodic")
    assert np.all(table.order_uv[1:] >= 1.9) and np.all(table.order_gauge[1:] >= 1.9)
