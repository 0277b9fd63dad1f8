"""Explicit finite-difference solver for the indicator-scaled scalar wave equation.

The update at node ``i`` is

    u[n+1] = 2 u[n] - u[n-1]
             + (1/g_i) sum_d (c0 dt / h_d)^2 * 2 H(g_i, g_j) (u_j - u_i)   (over faces)
             + dt^2 / (rho0 g_i) f[n]

with ``H(a, b) = (1/a + 1/b)**-1`` and ghost nodes mirroring the first
interior neighbour (zero normal derivative).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .grid import Grid, MaterialModel, ScalarField, TimeAxis


class CourantError(ValueError):
    """Raised when the time step violates the stability bound."""


@dataclass(frozen=True)
class SourceSpec:
    position: tuple[int, ...]
    amplitude: float = 1e12
    frequency: float = 5e5
    cycles: int = 2

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(int(i) for i in self.position))
        if not self.frequency > 0:
            raise ValueError("source frequency must be positive")
        if int(self.cycles) < 1:
            raise ValueError("source cycles must be >= 1")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency

    @property
    def duration(self) -> float:
        return self.cycles / self.frequency

    def scaled(self, factor: float) -> "SourceSpec":
        return SourceSpec(self.position, self.amplitude * factor, self.frequency, self.cycles)


@dataclass(frozen=True)
class SensorArray:
    positions: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        pos = tuple(tuple(int(i) for i in p) for p in self.positions)
        if len(set(pos)) != len(pos):
            raise ValueError("sensor positions must be distinct")
        object.__setattr__(self, "positions", pos)

    @property
    def count(self) -> int:
        return len(self.positions)

    def validate(self, grid: Grid) -> None:
        for p in self.positions:
            grid.check_index(p)


@dataclass(frozen=True)
class WavefieldHistory:
    grid: Grid
    time: TimeAxis
    snapshots: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.snapshots.shape != (self.time.n_steps + 1, *self.grid.shape):
            raise ValueError("snapshot array shape does not match grid/time axis")


@dataclass(frozen=True)
class ShotRecord:
    sensors: SensorArray
    time: TimeAxis
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.shape != (self.sensors.count, self.time.n_steps + 1):
            raise ValueError(
                f"record shape {vals.shape} != ({self.sensors.count}, {self.time.n_steps + 1})"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def sine_burst(t, src: SourceSpec):
    """Windowed sine burst; exactly zero outside ``[0, cycles / frequency]``."""
    t_arr = np.asarray(t, dtype=np.float64)
    w = src.omega
    inside = (t_arr >= 0.0) & (t_arr <= 2.0 * math.pi * src.cycles / w)
    val = src.amplitude * np.sin(w * t_arr) * np.sin(w * t_arr / (2.0 * src.cycles))
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def source_series(src: SourceSpec, grid: Grid, time: TimeAxis) -> np.ndarray:
    """Nodal force density at the source node for every time level."""
    return sine_burst(time.times, src) / grid.dx_norm2


def inject_source(force: np.ndarray, src: SourceSpec, t: float, grid: Grid) -> np.ndarray:
    """Return a copy of ``force`` with the scaled point source added at ``src.position``."""
    idx = grid.check_index(src.position)
    out = np.array(force, dtype=np.float64, copy=True)
    out[idx] += sine_burst(t, src) / grid.dx_norm2
    return out


def stencil_coefficients(grid: Grid, material: MaterialModel, time: TimeAxis):
    kappa = tuple((material.c0 * time.dt / h) ** 2 for h in grid.spacing)
    beta = time.dt**2 / material.rho0
    return kappa, beta


def check_courant(grid: Grid, material: MaterialModel, time: TimeAxis) -> float:
    c = time.courant(grid, material.c0)
    if not c < 1.0:
        raise CourantError(f"Courant number {c:.4f} violates c0*dt*sqrt(sum 1/h^2) < 1")
    return c


def _check_gamma(gamma: np.ndarray) -> None:
    if not np.all(np.isfinite(gamma)) or np.any(gamma <= 0.0):
        raise ValueError("indicator must be finite and strictly positive")


def _as_array(gamma) -> np.ndarray:
    if isinstance(gamma, ScalarField):
        return gamma.values
    return np.asarray(gamma, dtype=np.float64)


def step_wavefield(u_prev, u_curr, gamma, force_at_n, material: MaterialModel,
                   time: TimeAxis, grid: Grid) -> np.ndarray:
    """One leapfrog step with a dense force density ``force_at_n`` (or None)."""
    check_courant(grid, material, time)
    g = _as_array(gamma)
    _check_gamma(g)
    kappa, beta = stencil_coefficients(grid, material, time)
    fw = kernels.face_weights(g, kappa)
    out = np.empty(grid.shape)
    kernels.step(np.ascontiguousarray(u_prev, dtype=np.float64),
                 np.ascontiguousarray(u_curr, dtype=np.float64), fw, out)
    if force_at_n is not None:
        out += beta * fw.invg * np.asarray(force_at_n, dtype=np.float64)
    return out


PointSource = tuple[tuple[int, ...], np.ndarray]


def propagate(gamma, grid: Grid, material: MaterialModel, time: TimeAxis, *,
              point_sources: Sequence[PointSource] = (),
              dense_force: Callable[[int], np.ndarray] | None = None,
              record: Sequence[tuple[int, ...]] = (),
              store_history: bool = False,
              initial: tuple[np.ndarray, np.ndarray] | None = None,
              start: int = 1):
    """Time-march the wave equation and return ``(history | None, traces)``.

    ``point_sources`` are ``(node, series)`` pairs where ``series[n]`` is the
    force density applied in the step that produces level ``n + 1``.
    With ``start=1`` levels 0 and 1 are the initial states (zero unless
    ``initial`` is given); with ``start=0`` the march starts from zero
    states at levels -1 and 0, so the force at level 0 already acts.
    """
    check_courant(grid, material, time)
    g = _as_array(gamma)
    _check_gamma(g)
    kappa, beta = stencil_coefficients(grid, material, time)
    fw = kernels.face_weights(g, kappa)
    n_steps = time.n_steps
    shape = grid.shape

    if start not in (0, 1):
        raise ValueError("start must be 0 or 1")
    if initial is None:
        u_prev, u_curr = np.zeros(shape), np.zeros(shape)
    else:
        if start != 1:
            raise ValueError("initial states require start=1")
        u_prev = np.array(initial[0], dtype=np.float64, copy=True)
        u_curr = np.array(initial[1], dtype=np.float64, copy=True)
    u_next = np.empty(shape)

    src_flat = []
    for node, series in point_sources:
        flat = int(np.ravel_multi_index(grid.check_index(node), shape))
        series = np.asarray(series, dtype=np.float64)
        if series.shape != (n_steps + 1,):
            raise ValueError("source series must have n_steps + 1 entries")
        src_flat.append((flat, beta * fw.invg.reshape(-1)[flat] * series))
    rec_flat = np.array([np.ravel_multi_index(grid.check_index(p), shape) for p in record],
                        dtype=np.intp)

    traces = np.zeros((len(rec_flat), n_steps + 1))
    history = np.empty((n_steps + 1, *shape)) if store_history else None

    if start == 1:
        levels = [(0, u_prev), (1, u_curr)]
    else:
        levels = [(0, u_curr)]
    for n, u in levels:
        traces[:, n] = u.reshape(-1)[rec_flat]
        if history is not None:
            history[n] = u

    for n in range(start, n_steps):
        kernels.step(u_prev, u_curr, fw, u_next)
        if dense_force is not None:
            u_next += beta * fw.invg * dense_force(n)
        flat_next = u_next.reshape(-1)
        for flat, scaled in src_flat:
            flat_next[flat] += scaled[n]
        traces[:, n + 1] = flat_next[rec_flat]
        if history is not None:
            history[n + 1] = u_next
        u_prev, u_curr, u_next = u_curr, u_next, u_prev

    hist = WavefieldHistory(grid, time, history) if history is not None else None
    return hist, traces


def run_forward(gamma: ScalarField, material: MaterialModel, time: TimeAxis,
                src: SourceSpec, sensors: SensorArray, store_history: bool = False):
    """Simulate one shot; returns ``(WavefieldHistory | None, ShotRecord)``."""
    grid = gamma.grid
    sensors.validate(grid)
    series = source_series(src, grid, time)
    hist, traces = propagate(gamma, grid, material, time,
                             point_sources=[(src.position, series)],
                             record=sensors.positions, store_history=store_history)
    return hist, ShotRecord(sensors, time, traces)
