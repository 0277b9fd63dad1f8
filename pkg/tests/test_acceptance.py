"""Acceptance checks, one per criterion.

Each check prints ``criterion NN: PASS|FAIL  <numbers>`` and then asserts, so
the lines appear even when an assertion fails.  The expensive desk runs are
shared between criteria through module-scoped fixtures.

Run as a script for the lines alone: ``python3 tests/test_acceptance.py``.
"""
import math
import sys
import time as wall

import numpy as np
import pytest
from scipy.stats import spearmanr

from hybridfwi.adjoint import ResidualRecord, frechet_kernel, measurement_loss, run_adjoint
from hybridfwi.ansatz import ConstantAnsatz, chain_to_coeffs
from hybridfwi.backprop import backprop_through_solver
from hybridfwi.data import build_phantom, desk_geometry, desk_problem, desk_voids
from hybridfwi.forward import SensorArray, SourceSpec, run_forward, step_wavefield
from hybridfwi.gradcheck import fd_gradient, small_case
from hybridfwi.grid import MaterialModel, ScalarField, TimeAxis, make_grid
from hybridfwi.inversion import (TrainConfig, current_field, full_domain_pinn_invert,
                                 gradient_norm_field, invert, normalized_mse, pinn_field,
                                 sharpness_metric, wavefield_problem)
from hybridfwi.network import Conv, GeneratorNetwork, Upsample

import test_forward
import test_kernels
import test_network
from conftest import courant_dt, record_acceptance


def _check(number, ok, detail):
    record_acceptance(number, bool(ok), detail)
    assert ok, detail


def test_criterion_01_stencil_equivalence():
    t0 = wall.perf_counter()
    rng = np.random.default_rng(11)
    worst = 0.0
    for dims in ((33, 17), (12, 10, 9)):
        grid = make_grid(dims, tuple(1e-3 * (n - 1) for n in dims))
        mat = MaterialModel()
        time = TimeAxis(courant_dt(grid, mat.c0, 0.9), 1)
        kappa = tuple((mat.c0 * time.dt / h) ** 2 for h in grid.spacing)
        one = ScalarField.full(grid, 1.0)
        zero = np.zeros(dims)
        for _ in range(5):
            u_prev, u = rng.standard_normal(dims), rng.standard_normal(dims)
            ours = step_wavefield(u_prev, u, one, zero, mat, time, grid)
            ref = test_kernels.textbook_step(u_prev, u, kappa)
            worst = max(worst, float(np.abs(ours - ref).max()))
    dt = wall.perf_counter() - t0
    _check(1, worst <= 1e-13 and dt < 1.0, f"max abs diff {worst:.2e} (<= 1e-13), {dt:.2f} s")


def test_criterion_02_forward_convergence():
    t0 = wall.perf_counter()
    e = [test_forward.mms_error(k) for k in range(3)]
    orders = [math.log2(e[i] / e[i + 1]) for i in range(2)]
    dt = wall.perf_counter() - t0
    ok = all(1.7 <= p <= 2.3 for p in orders) and dt < 30.0
    _check(2, ok, f"errors {', '.join(f'{x:.3e}' for x in e)}; observed orders "
                  f"{orders[0]:.3f}, {orders[1]:.3f} (2.0 +- 0.3), {dt:.2f} s")


def test_criterion_03_discrete_adjoint_exact():
    t0 = wall.perf_counter()
    gamma, mat, time, src, sensors, data = small_case(nx=8, ny=6, n_steps=5, seed=0)
    assert gamma.values.min() >= 0.2 and gamma.values.max() <= 1.0

    def loss(vals):
        return measurement_loss(run_forward(ScalarField(gamma.grid, vals), mat, time, src, sensors)[1], data)
    fd = fd_gradient(gamma, loss)
    rev = backprop_through_solver(gamma, mat, time, src, sensors, data).values
    err = float(np.abs(rev - fd).max() / np.abs(fd).max())
    dt = wall.perf_counter() - t0
    _check(3, err <= 1e-6 and dt < 5.0, f"max rel error {err:.2e} (<= 1e-6), {dt:.2f} s")


def test_criterion_04_continuous_adjoint():
    t0 = wall.perf_counter()
    grid = make_grid((40, 20), (39e-3, 19e-3))
    mat = MaterialModel()
    time = TimeAxis(courant_dt(grid, mat.c0), 300)
    x, y = grid.mesh()
    truth = 1.0 - 0.3 * np.exp(-((x - 0.02) ** 2 + (y - 0.009) ** 2) / (2 * 0.004**2))
    src = SourceSpec((13, 19), frequency=1.5e5)
    sensors = SensorArray([(i, 19) for i in range(0, 40, 2)])
    _, data = run_forward(ScalarField(grid, truth), mat, time, src, sensors)
    g0 = ScalarField.full(grid, 1.0)

    hist, shot = run_forward(g0, mat, time, src, sensors, store_history=True)
    adj = run_adjoint(g0, mat, time, ResidualRecord.from_records(shot, data))
    cont = chain_to_coeffs(frechet_kernel(hist, adj, mat), ConstantAnsatz.uniform(grid, 1.0))
    rev = backprop_through_solver(g0, mat, time, src, sensors, data).values

    def loss(vals):
        return measurement_loss(run_forward(ScalarField(grid, vals), mat, time, src, sensors)[1], data)
    fd = fd_gradient(g0, loss)

    inner = (slice(1, -1), slice(1, -1))

    def rel(a, b):
        return float(np.linalg.norm(a[inner] - b[inner]) / np.linalg.norm(b[inner]))
    e_fd, e_rev = rel(cont, fd), rel(cont, rev)
    where = np.unravel_index(np.argmax(np.abs(cont - rev)), grid.shape)
    on_ring = bool(grid.boundary_mask()[where])
    dt = wall.perf_counter() - t0
    ok = e_fd <= 0.05 and e_rev <= 0.05 and on_ring and dt < 60.0
    _check(4, ok, f"interior rel L2 vs FD {e_fd:.4f}, vs discrete adjoint {e_rev:.4f} (<= 0.05); "
                  f"max discrepancy at {tuple(int(i) for i in where)} on boundary ring: {on_ring}; {dt:.2f} s")


def _dot(fwd, bwd, x, rng):
    y = fwd(x)
    w = rng.standard_normal(y.shape)
    a, b = np.sum(y * w), np.sum(x * bwd(x, w))
    return abs(a - b) / abs(a)


def test_criterion_05_network_gradient():
    t0 = wall.perf_counter()
    net = test_network.reduced_net(seed=1)
    assert len(net.blocks) == 2 and all(c == 4 for blk in net.blocks for c in blk)
    up = np.random.default_rng(0).standard_normal(net.grid.shape)
    fd_err = test_network.full_fd_check(net, up)

    rng = np.random.default_rng(5)
    dots = []
    for nd in (2, 3):
        x = rng.standard_normal((3,) + (5,) * nd)
        u = Upsample(nd)
        dots.append(_dot(u.forward, lambda x, w: u.backward(x, w)[0], x, rng))
        c = Conv(3, 2, nd, 3, 1)
        c.weight[...] = rng.standard_normal(c.weight.shape)
        dots.append(_dot(c.forward, lambda x, w: c.backward(x, w)[0], x, rng))
    full = rng.standard_normal(net.output_shape)
    small = rng.standard_normal(net.grid.shape)
    pad = np.zeros(net.output_shape)
    pad[net.crop_slices()] = small
    a, b = np.sum(full[net.crop_slices()] * small), np.sum(full * pad)
    dots.append(abs(a - b) / abs(a))
    dt = wall.perf_counter() - t0
    ok = fd_err <= 1e-5 and max(dots) <= 1e-10 and dt < 60.0
    _check(5, ok, f"{net.n_params} params, FD max rel error {fd_err:.2e} (<= 1e-5); "
                  f"worst dot-product mismatch {max(dots):.2e} (<= 1e-10); {dt:.2f} s")


def test_criterion_06_parameter_counts():
    n2, n3 = GeneratorNetwork.full_scale_2d().n_params, GeneratorNetwork.full_scale_3d().n_params
    _check(6, n2 == 526_252 and n3 == 6_306_764, f"2D {n2:,} (526,252), 3D {n3:,} (6,306,764)")


# -- desk inversions (criteria 7 to 10) -------------------------------------------------

EPOCHS = 50


def _run_constant():
    prob = desk_problem()
    cfg = TrainConfig(strategy="adjoint-constant", epochs=EPOCHS)
    assert cfg.alpha_min == 6e-2
    ans, hist = invert("adjoint-constant", prob, cfg)
    return prob, current_field(ans), hist


def _run_hybrid():
    prob = desk_problem()
    ans, hist = invert("hybrid", prob, TrainConfig(strategy="hybrid", epochs=EPOCHS))
    return prob, current_field(ans), hist


def _run_pinn():
    grid, mat, time, sources, _ = desk_geometry()
    truth = build_phantom(grid, desk_voids(grid), mat.eps)
    wp = wavefield_problem(grid, mat, time, sources, truth)
    cfg = TrainConfig(strategy="full-domain-pinn", epochs=100)
    net, hist, lam, sq0 = full_domain_pinn_invert(wp, cfg)
    return wp, pinn_field(net), hist, lam, sq0


def _timed(fn):
    t0 = wall.perf_counter()
    out = fn()
    return out, wall.perf_counter() - t0


@pytest.fixture(scope="module")
def constant_run():
    return _timed(_run_constant)


@pytest.fixture(scope="module")
def hybrid_run():
    return _timed(_run_hybrid)


@pytest.fixture(scope="module")
def pinn_run():
    return _timed(_run_pinn)


@pytest.mark.slow
def test_criterion_07_desk_constant(constant_run):
    (prob, field, hist), dt = constant_run
    start = normalized_mse(ScalarField.full(prob.grid, 1.0), prob.truth)
    final = normalized_mse(field, prob.truth)
    ok = start == 1.0 and final <= 0.5 and not hist.diverged and dt < 600.0
    _check(7, ok, f"normalized gamma-MSE {start:.3f} -> {final:.4f} (<= 0.5) after {len(hist)} epochs, "
                  f"{dt:.1f} s")


@pytest.mark.slow
def test_criterion_08_hybrid_vs_constant(constant_run, hybrid_run):
    (prob, f_const, _), _ = constant_run
    (_, f_hyb, h_hyb), dt = hybrid_run
    m_const, m_hyb = normalized_mse(f_const, prob.truth), normalized_mse(f_hyb, prob.truth)
    peak = max(gradient_norm_field(f_const).max(), gradient_norm_field(f_hyb).max())
    thr = 0.1 * peak
    _, s_const, _ = sharpness_metric(f_const, thr)
    _, s_hyb, empty = sharpness_metric(f_hyb, thr)
    ok = m_hyb <= m_const and s_hyb > s_const
    _check(8, ok, f"normalized MSE hybrid {m_hyb:.4f} vs constant {m_const:.4f} (need <=); "
                  f"sharpness hybrid {s_hyb:.3f}{' (empty)' if empty else ''} vs constant {s_const:.3f} "
                  f"at threshold {thr:.3g} (need >); hybrid {dt:.1f} s")


@pytest.mark.slow
def test_criterion_09_full_domain_collocation(pinn_run):
    (wp, field, hist, lam, sq0), dt = pinn_run
    m = normalized_mse(field, wp.truth)
    pinned = bool(np.all(field.values[wp.grid.boundary_mask()] == 1.0))
    lam_min = float(lam.values.min())
    rho = float(spearmanr((lam.values - 1.0).ravel(), np.asarray(sq0).ravel())[0])
    ok = m <= 0.1 and lam_min >= 0.0 and rho > 0.5 and pinned and not hist.diverged
    _check(9, ok, f"normalized MSE {m:.4f} (<= 0.1), min weight {lam_min:.3f} (>= 0), "
                  f"rank correlation {rho:.3f} (> 0.5), boundary pinned {pinned}; {dt:.1f} s")


@pytest.mark.slow
def test_criterion_10_determinism(tmp_path, constant_run, hybrid_run, pinn_run):
    pairs = {"constant": (constant_run[0][2], _run_constant()[2]),
             "hybrid": (hybrid_run[0][2], _run_hybrid()[2]),
             "pinn": (pinn_run[0][2], _run_pinn()[2])}
    same = {}
    for name, (a, b) in pairs.items():
        a.write(tmp_path / f"{name}_a.csv", tmp_path / f"{name}_a_t.csv")
        b.write(tmp_path / f"{name}_b.csv", tmp_path / f"{name}_b_t.csv")
        same[name] = (tmp_path / f"{name}_a.csv").read_bytes() == (tmp_path / f"{name}_b.csv").read_bytes()
    _check(10, all(same.values()), "bit-identical history files: "
                                   + ", ".join(f"{k} {v}" for k, v in same.items()))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
