import math

import numpy as np
import pytest

from hybridfwi.forward import (CourantError, SensorArray, ShotRecord, SourceSpec, check_courant,
                               inject_source, propagate, run_forward, sine_burst, source_series,
                               step_wavefield)
from hybridfwi.grid import MaterialModel, ScalarField, TimeAxis, make_grid

from conftest import courant_dt

PI = math.pi


def mms_error(level: int) -> float:
    """Max error at t=0.5 for u = cos(pi x) cos(2 pi y) sin(2 pi t) on [0,1]x[0,0.5].

    gamma = 0.7 + 0.25 cos(pi x) cos(2 pi y) has zero normal derivative on the
    boundary, as does u, so the mirrored ghosts are consistent.  With rho0 =
    c0 = 1 the forcing is gamma u_tt - div(gamma grad u).
    """
    nx, ny = 8 * 2**level + 1, 4 * 2**level + 1
    grid = make_grid((nx, ny), (1.0, 0.5))
    mat = MaterialModel(rho0=1.0, c0=1.0)
    n = int(round(0.5 / (0.5 * grid.spacing[0] / math.sqrt(2))))
    dt = 0.5 / n
    time = TimeAxis(dt, n)
    x, y = grid.mesh()
    X, Y = np.cos(PI * x), np.cos(2 * PI * y)
    Xp, Yp = -PI * np.sin(PI * x), -2 * PI * np.sin(2 * PI * y)
    gamma = 0.7 + 0.25 * X * Y

    def exact(t):
        return X * Y * math.sin(2 * PI * t)

    def force(k):
        s = math.sin(2 * PI * k * dt)
        return gamma * PI**2 * X * Y * s - 0.25 * s * ((Xp * Y) ** 2 + (X * Yp) ** 2)

    hist, _ = propagate(gamma, grid, mat, time, dense_force=force,
                        initial=(exact(0.0), exact(dt)), store_history=True)
    return float(np.abs(hist.snapshots[-1] - exact(0.5)).max())


def test_manufactured_solution_second_order():
    e = [mms_error(k) for k in range(3)]
    orders = [math.log2(e[i] / e[i + 1]) for i in range(2)]
    assert all(1.7 <= p <= 2.3 for p in orders), orders


def test_sine_burst_window():
    src = SourceSpec((0, 0), amplitude=2.0, frequency=1e5, cycles=2)
    t_end = 2 / 1e5
    assert sine_burst(0.0, src) == 0.0
    assert sine_burst(-1e-6, src) == 0.0
    assert sine_burst(t_end * 1.0001, src) == 0.0
    t = 0.3e-5
    w = 2 * PI * 1e5
    assert sine_burst(t, src) == pytest.approx(2.0 * math.sin(w * t) * math.sin(w * t / 4))


def test_source_spec_validation():
    with pytest.raises(ValueError):
        SourceSpec((0, 0), frequency=0.0)
    with pytest.raises(ValueError):
        SourceSpec((0, 0), cycles=0)
    assert SourceSpec((1, 1), amplitude=3.0).scaled(2.0).amplitude == 6.0


def test_source_scaling_by_spacing_norm():
    g = make_grid((5, 5), (4e-3, 4e-3))
    src = SourceSpec((2, 2), frequency=2e5)
    t = TimeAxis(1e-7, 30)
    s = source_series(src, g, t)
    assert np.allclose(s, sine_burst(t.times, src) / (2 * 1e-6))
    f = inject_source(np.zeros(g.shape), src, 1e-6, g)
    assert f[2, 2] == pytest.approx(sine_burst(1e-6, src) / g.dx_norm2)
    assert np.count_nonzero(f) == 1


def test_courant_check():
    g = make_grid((10, 10), (9e-3, 9e-3))
    mat = MaterialModel()
    ok = TimeAxis(courant_dt(g, mat.c0, 0.99), 5)
    assert check_courant(g, mat, ok) == pytest.approx(0.99)
    with pytest.raises(CourantError):
        check_courant(g, mat, TimeAxis(courant_dt(g, mat.c0, 1.01), 5))


def test_sensor_array_validation():
    with pytest.raises(ValueError):
        SensorArray([(1, 1), (1, 1)])
    g = make_grid((4, 4), (1.0, 1.0))
    with pytest.raises(ValueError):
        SensorArray([(4, 0)]).validate(g)


def test_record_shape_validated(small2d):
    _, _, time, _, _, sensors = small2d
    with pytest.raises(ValueError):
        ShotRecord(sensors, time, np.zeros((sensors.count, time.n_steps)))


def test_zero_source_zero_field(small2d):
    grid, mat, time, gamma, src, sensors = small2d
    hist, rec = run_forward(gamma, mat, time, src.scaled(0.0), sensors, store_history=True)
    assert not np.any(hist.snapshots)
    assert not np.any(rec.values)


def test_initial_levels_are_zero(small2d):
    grid, mat, time, gamma, src, sensors = small2d
    hist, _ = run_forward(gamma, mat, time, src, sensors, store_history=True)
    assert not np.any(hist.snapshots[0]) and not np.any(hist.snapshots[1])
    assert np.any(hist.snapshots[2])


def test_linearity_in_amplitude(small2d):
    grid, mat, time, gamma, src, sensors = small2d
    _, a = run_forward(gamma, mat, time, src, sensors)
    _, b = run_forward(gamma, mat, time, src.scaled(-3.5), sensors)
    assert np.allclose(b.values, -3.5 * a.values, rtol=1e-12, atol=1e-14 * np.abs(a.values).max())


def test_reciprocity_homogeneous():
    g = make_grid((15, 11), (14e-3, 10e-3))
    mat = MaterialModel()
    t = TimeAxis(courant_dt(g, mat.c0), 80)
    one = ScalarField.full(g, 1.0)
    a, b = (4, 3), (10, 8)
    _, ab = run_forward(one, mat, t, SourceSpec(a, frequency=3e5), SensorArray([b]))
    _, ba = run_forward(one, mat, t, SourceSpec(b, frequency=3e5), SensorArray([a]))
    assert np.allclose(ab.values, ba.values, rtol=1e-10, atol=1e-12 * np.abs(ab.values).max())


def test_step_wavefield_matches_propagate(small2d):
    grid, mat, time, gamma, src, sensors = small2d
    hist, _ = run_forward(gamma, mat, time, src, sensors, store_history=True)
    u = hist.snapshots
    series = source_series(src, grid, time)
    n = 7
    force = np.zeros(grid.shape)
    force[src.position] = series[n]
    nxt = step_wavefield(u[n - 1], u[n], gamma, force, mat, time, grid)
    assert np.allclose(nxt, u[n + 1], rtol=1e-13, atol=1e-13 * np.abs(u[n + 1]).max())


def test_nonpositive_indicator_rejected(small2d):
    grid, mat, time, gamma, src, sensors = small2d
    bad = gamma.values.copy()
    bad[2, 2] = 0.0
    with pytest.raises(ValueError):
        run_forward(ScalarField(grid, bad), mat, time, src, sensors)


def test_three_dimensional_run(each_backend):
    g = make_grid((7, 6, 5), (6e-3, 5e-3, 4e-3))
    mat = MaterialModel()
    t = TimeAxis(courant_dt(g, mat.c0), 25)
    src = SourceSpec((3, 3, 2), frequency=4e5)
    one = ScalarField.full(g, 1.0)
    _, rec = run_forward(one, mat, t, src, SensorArray([(0, 0, 0), (3, 3, 4)]))
    assert np.all(np.isfinite(rec.values)) and np.abs(rec.values).max() > 0
    # mirror symmetry of a centred source along the x axis
    hist, _ = run_forward(one, mat, t, src, SensorArray([]), store_history=True)
    u = hist.snapshots[-1]
    assert np.allclose(u, u[::-1, :, :], atol=1e-12 * np.abs(u).max())
