"""Exact reverse-mode differentiation of the discrete solver.

The sweep replays the stored forward history backwards, accumulating the
cotangent of every time level and the indicator gradient.  Only three
cotangent buffers are live at any time.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .adjoint import measurement_loss, time_weights
from .forward import (ShotRecord, SensorArray, SourceSpec, run_forward, source_series,
                      stencil_coefficients, check_courant, _as_array)
from .grid import Grid, MaterialModel, ScalarField, TimeAxis


def reverse_step(cot_next, cot_curr, u_curr, gamma, accum, *, material: MaterialModel,
                 time: TimeAxis, grid: Grid, force=None):
    """Transpose of one leapfrog step.

    ``cot_next`` is the cotangent of the level the step produced.  Returns
    the updated ``(cot_curr, cot_prev_contribution, accum)``; the inputs
    are not modified.  ``force`` is the dense force density used in the step.
    """
    g = _as_array(gamma)
    kappa, beta = stencil_coefficients(grid, material, time)
    fw = kernels.face_weights(g, kappa)
    lam = np.ascontiguousarray(cot_next, dtype=np.float64)
    cur = np.array(cot_curr, dtype=np.float64, copy=True)
    prev = np.zeros(grid.shape)
    acc = np.array(accum, dtype=np.float64, copy=True)
    kernels.reverse(lam, cur, prev, np.ascontiguousarray(u_curr, dtype=np.float64), fw, acc)
    if force is not None:
        acc -= beta * lam * np.asarray(force) * fw.invg**2
    return cur, prev, acc


def backprop_through_solver(gamma: ScalarField, material: MaterialModel, time: TimeAxis,
                            src: SourceSpec, sensors: SensorArray, data: ShotRecord,
                            trapezoid: bool = False) -> ScalarField:
    """Gradient of the discrete sensor misfit w.r.t. every nodal indicator value."""
    return loss_and_gradient(gamma, material, time, src, sensors, data, trapezoid)[1]


def loss_and_gradient(gamma: ScalarField, material: MaterialModel, time: TimeAxis,
                      src: SourceSpec, sensors: SensorArray, data: ShotRecord,
                      trapezoid: bool = False):
    """``(loss, dL/dgamma)`` from one forward run and one reverse sweep."""
    grid = gamma.grid
    check_courant(grid, material, time)
    hist, shot = run_forward(gamma, material, time, src, sensors, store_history=True)
    loss = measurement_loss(shot, data, trapezoid)
    g = gamma.values
    kappa, beta = stencil_coefficients(grid, material, time)
    fw = kernels.face_weights(g, kappa)
    u = hist.snapshots
    n_steps = time.n_steps

    seeds = (shot.values - data.values) * time_weights(time, trapezoid)
    sens = tuple(np.array(sensors.positions).T) if sensors.count else None
    sidx = grid.check_index(src.position)
    fsrc = source_series(src, grid, time)

    def seeded(buf, n):
        buf.fill(0.0)
        if sens is not None:
            np.add.at(buf, sens, seeds[:, n])
        return buf

    lam_next = seeded(np.empty(grid.shape), n_steps)
    lam_curr = seeded(np.empty(grid.shape), n_steps - 1)
    spare = np.empty(grid.shape)
    gbar = np.zeros(grid.shape)
    for n in range(n_steps - 1, 0, -1):
        lam_prev = seeded(spare, n - 1)
        kernels.reverse(lam_next, lam_curr, lam_prev, u[n], fw, gbar)
        gbar[sidx] -= beta * lam_next[sidx] * fsrc[n] * fw.invg[sidx] ** 2
        spare = lam_next
        lam_next, lam_curr = lam_curr, lam_prev
    return loss, ScalarField(grid, gbar)
