"""Continuous adjoint-state gradient of the sensor misfit.

The adjoint field is obtained by running the (self-adjoint) forward
operator on the time-reversed, sign-flipped residuals injected at the
sensor nodes, then reversing the result in time.  The Frechet kernel

    K(x) = sum_t [ -rho0 du+/dt du/dt + rho0 c0^2 grad u+ . grad u ] dt

is assembled with central differences (one-sided at the ends).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forward import ShotRecord, WavefieldHistory, propagate
from .grid import MaterialModel, ScalarField, TimeAxis


def time_weights(time: TimeAxis, trapezoid: bool = False) -> np.ndarray:
    w = np.full(time.n_steps + 1, time.dt)
    if trapezoid:
        w[0] = w[-1] = 0.5 * time.dt
    return w


@dataclass(frozen=True)
class ResidualRecord:
    """Prediction minus measurement, per sensor and time level."""

    record: ShotRecord

    @classmethod
    def from_records(cls, shot: ShotRecord, data: ShotRecord) -> "ResidualRecord":
        _check_pair(shot, data)
        return cls(ShotRecord(shot.sensors, shot.time, shot.values - data.values))

    @property
    def values(self) -> np.ndarray:
        return self.record.values


@dataclass(frozen=True)
class AdjointHistory:
    grid: object
    time: TimeAxis
    snapshots: np.ndarray = field(repr=False)


def _check_pair(shot: ShotRecord, data: ShotRecord) -> None:
    if shot.sensors != data.sensors:
        raise ValueError("sensor arrays differ")
    if shot.time != data.time or shot.values.shape != data.values.shape:
        raise ValueError("time axes or record shapes differ")


def measurement_loss(shot: ShotRecord, data: ShotRecord, trapezoid: bool = False) -> float:
    """Half the time-integrated squared sensor residual."""
    _check_pair(shot, data)
    r = shot.values - data.values
    return 0.5 * float(np.sum((r * r) @ time_weights(shot.time, trapezoid)))


def run_adjoint(gamma: ScalarField, material: MaterialModel, time: TimeAxis,
                residual: ResidualRecord, trapezoid: bool = False) -> AdjointHistory:
    """Simulate the adjoint wavefield backward in time from a zero terminal state."""
    grid = gamma.grid
    res = residual.values
    if res.shape[1] != time.n_steps + 1:
        raise ValueError("residual length does not match the time axis")
    if not np.all(np.isfinite(res)):
        raise ValueError("residual contains non-finite values")
    n = time.n_steps
    q = grid.quadrature_weights()
    vol = grid.cell_volume
    w = time_weights(time, trapezoid) / time.dt
    sources = []
    for s, pos in enumerate(residual.record.sensors.positions):
        density = -w * res[s] / (q[pos] * vol)
        series = np.zeros(n + 1)
        series[:n] = density[n - 1::-1]
        sources.append((pos, series))
    hist, _ = propagate(gamma, grid, material, time, point_sources=sources,
                        store_history=True, start=0)
    return AdjointHistory(grid, time, hist.snapshots[::-1].copy())


def frechet_kernel(forward: WavefieldHistory, adjoint: AdjointHistory,
                   material: MaterialModel, trapezoid: bool = False) -> ScalarField:
    """Sensitivity density of the misfit with respect to the indicator."""
    u, a = forward.snapshots, adjoint.snapshots
    if u.shape != a.shape:
        raise ValueError("forward and adjoint histories differ in shape")
    grid, time = forward.grid, forward.time
    dt, rho0, c2 = time.dt, material.rho0, material.c0**2
    weights = time_weights(time, trapezoid)
    last = u.shape[0] - 1
    kern = np.zeros(grid.shape)
    for n in range(last + 1):
        lo, hi = max(n - 1, 0), min(n + 1, last)
        span = (hi - lo) * dt
        ut = (u[hi] - u[lo]) / span
        at = (a[hi] - a[lo]) / span
        term = -rho0 * at * ut
        gu = np.gradient(u[n], *grid.spacing)
        ga = np.gradient(a[n], *grid.spacing)
        for d in range(grid.ndim):
            term += rho0 * c2 * gu[d] * ga[d]
        kern += weights[n] * term
    return ScalarField(grid, kern)
