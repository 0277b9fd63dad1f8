import numpy as np
import pytest

from hybridfwi.data import (BoxVoid, Problem, Void, build_phantom, desk_geometry, desk_problem,
                            make_reference_data)
from hybridfwi.forward import ShotRecord, run_forward
from hybridfwi.grid import ScalarField, make_grid
from hybridfwi.inversion import (HISTORY_COLUMNS, PenaltyWeights, TrainConfig, TrainingHistory,
                                 current_field, full_domain_pinn_invert, gradient_norm_field, invert,
                                 misfit, misfit_and_density, normalized_mse, pinn_field, pinn_residual,
                                 sharpness_metric, wavefield_problem)
from hybridfwi.forward import source_series, stencil_coefficients


@pytest.fixture(scope="module")
def tiny():
    return desk_problem(refine=1, nx=24, ny=12, n_steps=120, frequency=1.5e5, n_sources=2)


# -- data -------------------------------------------------------------------------

def test_phantom_rasterisation():
    g = make_grid((252, 124), (0.1, 0.1 * 123 / 251))
    ph = build_phantom(g, [Void((0.05, 0.0245), 5e-3)], eps=1e-5)
    n_void = np.count_nonzero(ph.values < 0.5)
    expect = np.pi * 2.5e-3**2 / g.cell_volume
    assert abs(n_void - expect) <= 0.05 * expect
    assert set(np.unique(ph.values)) == {1e-5, 1.0}


def test_void_validation():
    g = make_grid((20, 10), (0.1, 0.05))
    with pytest.raises(ValueError):
        Void((0.099, 0.02), 0.01).check(g)
    with pytest.raises(ValueError):
        Void((0.05, 0.02), -1.0).check(g)
    box = BoxVoid((0.02, 0.01), (0.04, 0.03))
    box.check(g)
    assert box.mask(g).sum() > 0


def test_desk_geometry():
    grid, mat, time, sources, sensors = desk_geometry()
    assert grid.dims == (64, 32) and len(sources) == 4
    src_nodes = {s.position for s in sources}
    assert not src_nodes & set(sensors.positions)
    assert all(grid.boundary_mask()[p] for p in sensors.positions)
    assert time.courant(grid, mat.c0) == pytest.approx(0.45)
    _, _, _, _, top = desk_geometry(layout="top")
    assert all(p[1] == 31 for p in top.positions)


def test_reference_data_differs_from_inverse_crime():
    grid, mat, time, sources, sensors = desk_geometry(nx=24, ny=12, n_steps=120, frequency=1.5e5)
    voids = [Void((0.06, 0.025), 0.012)]
    fine = make_reference_data(voids, grid, mat, time, sources[:1], sensors, refine=2)[0]
    crime = make_reference_data(voids, grid, mat, time, sources[:1], sensors, refine=1)[0]
    _, direct = run_forward(build_phantom(grid, voids, mat.eps), mat, time, sources[0], sensors)
    assert np.array_equal(crime.values, direct.values)
    rel = np.linalg.norm(fine.values - crime.values) / np.linalg.norm(crime.values)
    assert 1e-3 < rel < 0.5


def test_problem_validation(tiny):
    with pytest.raises(ValueError):
        Problem(tiny.grid, tiny.material, tiny.time, tiny.sources, tiny.sensors,
                tiny.data[:1], tiny.truth)


# -- configuration and history ------------------------------------------------------

def test_train_config_defaults_and_validation():
    assert TrainConfig(strategy="hybrid").alpha_min == 4e-3
    assert TrainConfig().alpha_min == 6e-2
    assert TrainConfig(strategy="backprop-nn").alpha_min == 2e-3
    cfg = TrainConfig(strategy="full-domain-pinn")
    assert (cfg.alpha_min, cfg.alpha_max) == (2e-3, 2e-2)
    assert cfg.lr(5) == pytest.approx(2e-3 * 2.0**-0.5)
    for bad in ({"strategy": "sgd"}, {"epochs": 0}, {"a": 0.5}, {"b": -1.0}, {"clip": 0.0},
                {"alpha_min": -1.0}):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_history_roundtrip(tmp_path):
    h = TrainingHistory()
    h.append(0.1, epoch=0, cost=1.5, cost_norm=1.0, mse=0.1, mse_norm=1.0, lr=0.06, grad_norm=3.0)
    h.append(0.2, epoch=1, cost=1.0 / 3.0, cost_norm=0.2, mse=0.05, mse_norm=0.5, lr=0.05, grad_norm=2.0)
    h.write(tmp_path / "h.csv", tmp_path / "t.csv")
    back = TrainingHistory.read(tmp_path / "h.csv")
    assert back.rows == h.rows
    assert (tmp_path / "h.csv").read_text().splitlines()[0] == ",".join(HISTORY_COLUMNS)
    assert "wall_time" in (tmp_path / "t.csv").read_text()


# -- drivers ----------------------------------------------------------------------

def test_misfit_engines_agree_in_direction(tiny):
    g = ScalarField.full(tiny.grid, 1.0)
    la, da = misfit_and_density(g, tiny, "adjoint")
    lb, db = misfit_and_density(g, tiny, "backprop")
    assert la == pytest.approx(lb, rel=1e-14) == misfit(g, tiny)
    s = (slice(2, -2), slice(2, -2))
    cos = np.sum(da.values[s] * db.values[s]) / (np.linalg.norm(da.values[s]) * np.linalg.norm(db.values[s]))
    assert cos > 0.9


def test_workers_do_not_change_result(tiny):
    g = ScalarField.full(tiny.grid, 1.0)
    a = misfit_and_density(g, tiny, "adjoint", workers=1)
    b = misfit_and_density(g, tiny, "adjoint", workers=2)
    assert a[0] == b[0] and np.array_equal(a[1].values, b[1].values)


def test_zero_residual_is_stationary(tiny):
    one = ScalarField.full(tiny.grid, 1.0)
    data = tuple(run_forward(one, tiny.material, tiny.time, s, tiny.sensors)[1] for s in tiny.sources)
    prob = Problem(tiny.grid, tiny.material, tiny.time, tiny.sources, tiny.sensors, data, tiny.truth)
    ans, hist = invert("adjoint-constant", prob, TrainConfig(epochs=3))
    assert np.all(hist.column("cost") == 0.0)
    assert np.all(ans.coefficients == 1.0)


@pytest.mark.parametrize("strategy", ["adjoint-constant", "backprop-nn", "hybrid"])
def test_short_runs(tiny, strategy):
    cfg = TrainConfig(strategy=strategy, epochs=4, channels=(8, 8, 4))
    ans, hist = invert(strategy, tiny, cfg)
    assert len(hist) == 4 and not hist.diverged
    assert np.all(np.isfinite(hist.column("cost")))
    f = current_field(ans)
    assert np.all((f.values >= tiny.material.eps) & (f.values <= tiny.material.upper))
    if strategy == "adjoint-constant":
        assert hist.column("cost_norm")[0] == 1.0
        assert hist.column("cost")[-1] < hist.column("cost")[0]


def test_invert_rejects_pinn(tiny):
    with pytest.raises(ValueError):
        invert("full-domain-pinn", tiny)


# -- collocation ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def wave_tiny(tiny):
    return wavefield_problem(tiny.grid, tiny.material, tiny.time, tiny.sources[:1], tiny.truth)


def test_pinn_residual_vanishes_at_truth(wave_tiny):
    p = wave_tiny
    kappa, beta = stencil_coefficients(p.grid, p.material, p.time)
    u = p.wavefields[0]
    f = np.zeros(u.shape)
    f[(slice(None),) + p.sources[0].position] = source_series(p.sources[0], p.grid, p.time)
    R, _, levels = pinn_residual(p.truth.values, u, f, kappa, beta)
    acc = u[2:] - 2 * u[1:-1] + u[:-2]
    assert np.abs(R).max() <= 1e-10 * np.abs(acc).max()
    assert len(levels) == p.time.n_steps - 1
    R2, _, lv2 = pinn_residual(np.full(p.grid.shape, 0.5), u, f, kappa, beta, stride=3)
    assert list(lv2) == list(range(1, p.time.n_steps, 3)) and np.abs(R2).max() > 0


def test_pinn_short_run(wave_tiny):
    cfg = TrainConfig(strategy="full-domain-pinn", epochs=3, channels=(8, 8, 4))
    net, hist, lam, sq0 = full_domain_pinn_invert(wave_tiny, cfg)
    assert len(hist) == 3 and np.all(lam.values >= 1.0)
    assert lam.values.shape == tuple(n - 2 for n in wave_tiny.grid.shape)
    f = pinn_field(net)
    assert np.all(f.values[wave_tiny.grid.boundary_mask()] == 1.0)


def test_penalty_weights_nonnegative():
    with pytest.raises(ValueError):
        PenaltyWeights(np.array([1.0, -0.1]))


# -- metrics ------------------------------------------------------------------------

def test_sharpness_metric():
    g = make_grid((11, 11), (1.0, 1.0))
    step = np.ones(g.shape)
    step[5:] = 0.0
    f = ScalarField(g, step)
    norm, mean, empty = sharpness_metric(f, 0.1)
    assert not empty and mean == pytest.approx(5.0)  # jump of 1 over one 0.1 spacing, halved by central differences
    assert np.array_equal(norm, gradient_norm_field(f))
    assert sharpness_metric(ScalarField.full(g, 1.0), 0.1)[1:] == (0.0, True)
    with pytest.raises(ValueError):
        sharpness_metric(f, 0.0)


def test_normalized_mse(tiny):
    assert normalized_mse(ScalarField.full(tiny.grid, 1.0), tiny.truth) == 1.0
    assert normalized_mse(tiny.truth, tiny.truth) == 0.0
