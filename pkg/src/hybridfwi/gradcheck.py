"""Side-by-side comparison of the three gradient engines on a small case."""
from __future__ import annotations

import csv
import math

import numpy as np

from .adjoint import ResidualRecord, frechet_kernel, measurement_loss, run_adjoint
from .ansatz import ConstantAnsatz, chain_to_coeffs
from .backprop import backprop_through_solver
from .forward import SensorArray, ShotRecord, SourceSpec, run_forward
from .grid import MaterialModel, ScalarField, TimeAxis, make_grid


def fd_gradient(gamma: ScalarField, loss_fn, rel_step: float = 1e-6) -> np.ndarray:
    """Central differences of ``loss_fn(values)`` w.r.t. every nodal value."""
    g = gamma.values
    out = np.zeros(g.shape)
    for idx in np.ndindex(g.shape):
        h = rel_step * max(abs(g[idx]), 1e-3)
        plus, minus = g.copy(), g.copy()
        plus[idx] += h
        minus[idx] -= h
        out[idx] = (loss_fn(plus) - loss_fn(minus)) / (2.0 * h)
    return out


def small_case(nx=8, ny=6, n_steps=5, seed=0):
    """Random-indicator case resolved enough that every sensor sees signal."""
    rng = np.random.default_rng(seed)
    grid = make_grid((nx, ny), (7e-3 * (nx - 1) / 7, 5e-3 * (ny - 1) / 5))
    mat = MaterialModel()
    dt = 0.4 / (mat.c0 * math.sqrt(sum(1.0 / h**2 for h in grid.spacing)))
    time = TimeAxis(dt, n_steps)
    gamma = ScalarField(grid, 0.2 + 0.8 * rng.random(grid.shape))
    c = (nx // 2, ny // 2)
    src = SourceSpec(c, amplitude=1.0, frequency=1.0 / (6.0 * dt))
    sensors = SensorArray([c, (c[0] - 1, c[1]), (c[0] + 1, c[1]), (c[0], c[1] - 1)])
    _, ref = run_forward(ScalarField.full(grid, 1.0), mat, time, src, sensors)
    noise = 1e-2 * np.abs(ref.values).max() * rng.standard_normal(ref.values.shape)
    data = ShotRecord(sensors, time, 0.5 * ref.values + noise)
    return gamma, mat, time, src, sensors, data


def gradient_report(nx=8, ny=6, n_steps=5, seed=0):
    gamma, mat, time, src, sensors, data = small_case(nx, ny, n_steps, seed)
    grid = gamma.grid
    ans = ConstantAnsatz.uniform(grid, 1.0)

    def loss_of(vals):
        _, rec = run_forward(ScalarField(grid, vals), mat, time, src, sensors)
        return measurement_loss(rec, data)

    fd = fd_gradient(gamma, loss_of)
    rev = backprop_through_solver(gamma, mat, time, src, sensors, data).values
    hist, shot = run_forward(gamma, mat, time, src, sensors, store_history=True)
    adj = run_adjoint(gamma, mat, time, ResidualRecord.from_records(shot, data))
    cont = chain_to_coeffs(frechet_kernel(hist, adj, mat), ans)
    scale = np.abs(fd).max()
    summary = {
        "reverse_vs_fd_max_rel": float(np.abs(rev - fd).max() / scale),
        "adjoint_vs_fd_rel_l2": float(np.linalg.norm(cont - fd) / np.linalg.norm(fd)),
        "adjoint_vs_reverse_rel_l2": float(np.linalg.norm(cont - rev) / np.linalg.norm(rev)),
    }
    return {"fd": fd, "reverse": rev, "adjoint": cont, "summary": summary}


def write_report(path, rep) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("index", "fd", "reverse", "adjoint"))
        for idx in np.ndindex(rep["fd"].shape):
            w.writerow((":".join(map(str, idx)), repr(float(rep["fd"][idx])),
                        repr(float(rep["reverse"][idx])), repr(float(rep["adjoint"][idx]))))
        for k, v in rep["summary"].items():
            w.writerow((k, repr(v), "", ""))
