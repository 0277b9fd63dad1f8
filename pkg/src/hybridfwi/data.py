"""Phantoms, synthetic measurements and the desk-scale benchmark case."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .forward import SensorArray, ShotRecord, SourceSpec, propagate, run_forward, source_series
from .grid import Grid, MaterialModel, ScalarField, TimeAxis, make_grid


@dataclass(frozen=True)
class Void:
    """Circular (2D) or spherical (3D) void; centre and diameter in metres."""

    center: tuple[float, ...]
    diameter: float

    def check(self, grid: Grid) -> None:
        r = 0.5 * self.diameter
        if len(self.center) != grid.ndim:
            raise ValueError("void centre dimensionality does not match the grid")
        if not r > 0:
            raise ValueError("void diameter must be positive")
        for c, e in zip(self.center, grid.extent):
            if c - r < 0 or c + r > e:
                raise ValueError(f"void at {self.center} (d={self.diameter}) leaves the domain")

    def mask(self, grid: Grid) -> np.ndarray:
        r2 = sum((x - c) ** 2 for x, c in zip(grid.mesh(), self.center))
        return r2 <= (0.5 * self.diameter) ** 2


@dataclass(frozen=True)
class BoxVoid:
    """Axis-aligned box void between ``lower`` and ``upper`` corners (metres)."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def check(self, grid: Grid) -> None:
        if len(self.lower) != grid.ndim or len(self.upper) != grid.ndim:
            raise ValueError("box corner dimensionality does not match the grid")
        for lo, hi, e in zip(self.lower, self.upper, grid.extent):
            if not 0 <= lo < hi <= e:
                raise ValueError(f"box {self.lower}-{self.upper} is empty or leaves the domain")

    def mask(self, grid: Grid) -> np.ndarray:
        m = np.ones(grid.shape, dtype=bool)
        for x, lo, hi in zip(grid.mesh(), self.lower, self.upper):
            m &= (x >= lo) & (x <= hi)
        return m


def build_phantom(grid: Grid, voids, eps: float = 1e-5) -> ScalarField:
    """Indicator that is 1 in intact material and ``eps`` on nodes inside any void."""
    gamma = np.ones(grid.shape)
    for v in voids:
        v.check(grid)
        gamma[v.mask(grid)] = eps
    return ScalarField(grid, gamma)


def make_reference_data(voids, grid: Grid, material: MaterialModel, time: TimeAxis,
                        sources, sensors: SensorArray, refine: int = 2):
    """Measurements simulated on a ``refine``-times finer grid and time axis.

    The fine run is subsampled back onto the coarse sensor nodes and time
    levels.  Point-source amplitudes are corrected by ``refine**(ndim-2)``
    so the nodal source keeps the same integrated strength.
    """
    refine = int(refine)
    if refine < 1:
        raise ValueError("refine must be >= 1")
    fine = grid.refined(refine)
    ftime = time.refined(refine)
    gamma = build_phantom(fine, voids, material.eps)
    fsens = SensorArray([tuple(refine * i for i in p) for p in sensors.positions])
    records = []
    for src in sources:
        fsrc = SourceSpec(tuple(refine * i for i in src.position),
                          src.amplitude * refine ** (grid.ndim - 2), src.frequency, src.cycles)
        _, rec = run_forward(gamma, material, ftime, fsrc, fsens)
        records.append(ShotRecord(sensors, time, rec.values[:, ::refine]))
    return records


def make_wavefield_data(gamma: ScalarField, material: MaterialModel, time: TimeAxis, src: SourceSpec):
    """Full space-time wavefield from the solver itself (collocation data)."""
    series = source_series(src, gamma.grid, time)
    hist, _ = propagate(gamma, gamma.grid, material, time,
                        point_sources=[(src.position, series)], store_history=True)
    return hist


@dataclass(frozen=True)
class Problem:
    grid: Grid
    material: MaterialModel
    time: TimeAxis
    sources: tuple
    sensors: SensorArray
    data: tuple
    truth: ScalarField | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.sources) != len(self.data):
            raise ValueError("one measured record per source is required")
        if not self.sources:
            raise ValueError("at least one source is required")
        for rec in self.data:
            if rec.sensors != self.sensors or rec.time != self.time:
                raise ValueError("measured record does not match sensors/time axis")


def desk_geometry(nx: int = 64, ny: int = 32, length: float = 0.1, courant: float = 0.45,
                  n_steps: int = 300, frequency: float = 2e5, n_sources: int = 4,
                  sensor_stride: int = 2, amplitude: float = 1.6e11, layout: str = "ring"):
    """Reduced 2D benchmark: sources on the top face, sensors on the ring or the top face.

    Sensor nodes never coincide with source nodes.
    """
    grid = make_grid((nx, ny), (length, length * (ny - 1) / (nx - 1)))
    material = MaterialModel()
    dt = courant / (material.c0 * math.sqrt(sum(1.0 / h**2 for h in grid.spacing)))
    time = TimeAxis(dt, n_steps)
    top = ny - 1
    xs = [int(round((k + 1) * (nx - 1) / (n_sources + 1))) for k in range(n_sources)]
    sources = tuple(SourceSpec((x, top), amplitude, frequency, 2) for x in xs)
    src_nodes = {s.position for s in sources}
    if layout == "ring":
        cand = [tuple(int(i) for i in p) for p in np.argwhere(grid.boundary_mask())
                if sum(p) % sensor_stride == 0]
    elif layout == "top":
        cand = [(i, top) for i in range(0, nx, sensor_stride)]
    else:
        raise ValueError(f"unknown layout {layout!r}")
    sensors = SensorArray([p for p in cand if p not in src_nodes])
    return grid, material, time, sources, sensors


def desk_voids(grid: Grid):
    """One circular void of diameter one tenth of the long edge, off centre."""
    lx, ly = grid.extent
    return [Void((0.6 * lx, 0.45 * ly), 0.1 * max(grid.extent))]


def desk_problem(refine: int = 2, **kw) -> Problem:
    grid, material, time, sources, sensors = desk_geometry(**kw)
    voids = desk_voids(grid)
    data = make_reference_data(voids, grid, material, time, sources, sensors, refine)
    truth = build_phantom(grid, voids, material.eps)
    return Problem(grid, material, time, sources, sensors, tuple(data), truth)
