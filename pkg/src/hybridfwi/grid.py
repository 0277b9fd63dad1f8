"""Grid geometry, field containers and elementary field algebra.

All containers are frozen dataclasses holding read-only numpy arrays, so
they can be shared between concurrently simulated shots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

STENCIL_RADIUS = 1


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Grid:
    """Node-centred regular grid.

    ``dims`` are node counts per axis (axis 0 is x), ``spacing`` the node
    distance and ``extent`` the physical length spanned by the nodes, so that
    ``spacing[d] == extent[d] / (dims[d] - 1)``.
    """

    dims: tuple[int, ...]
    spacing: tuple[float, ...]
    extent: tuple[float, ...]
    ghost_layers: int = 2

    def __post_init__(self):
        nd = len(self.dims)
        if nd not in (2, 3):
            raise ValueError(f"grid must be 2D or 3D, got {nd} axes")
        if len(self.spacing) != nd or len(self.extent) != nd:
            raise ValueError("dims, spacing and extent must have the same length")
        for d in range(nd):
            if int(self.dims[d]) < 3:
                raise ValueError(f"dims[{d}]={self.dims[d]} must be >= 3")
            if not self.spacing[d] > 0 or not self.extent[d] > 0:
                raise ValueError(f"spacing/extent along axis {d} must be positive")
            expected = self.extent[d] / (self.dims[d] - 1)
            if abs(expected - self.spacing[d]) > 1e-12 * abs(expected):
                raise ValueError(
                    f"spacing[{d}]={self.spacing[d]!r} inconsistent with "
                    f"extent/(dims-1)={expected!r}"
                )
        if self.ghost_layers < STENCIL_RADIUS:
            raise ValueError(f"ghost_layers must be >= {STENCIL_RADIUS}")

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(n) for n in self.dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def dx_norm2(self) -> float:
        """Squared Euclidean norm of the spacing vector, used for source scaling."""
        return float(sum(h * h for h in self.spacing))

    def coordinates(self) -> list[np.ndarray]:
        """Node coordinates per axis, starting at the origin."""
        return [np.arange(n) * h for n, h in zip(self.dims, self.spacing)]

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.coordinates(), indexing="ij")

    def boundary_mask(self) -> np.ndarray:
        """True on the outermost ring of nodes."""
        mask = np.zeros(self.shape, dtype=bool)
        for d in range(self.ndim):
            idx = [slice(None)] * self.ndim
            idx[d] = 0
            mask[tuple(idx)] = True
            idx[d] = -1
            mask[tuple(idx)] = True
        return mask

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoidal nodal weights (1/2 per boundary axis)."""
        w = np.ones(self.shape)
        for d in range(self.ndim):
            wd = np.ones(self.dims[d])
            wd[0] = wd[-1] = 0.5
            shape = [1] * self.ndim
            shape[d] = -1
            w = w * wd.reshape(shape)
        return w

    def check_index(self, index) -> tuple[int, ...]:
        index = tuple(int(i) for i in index)
        if len(index) != self.ndim:
            raise ValueError(f"node index {index} has wrong dimensionality")
        for d, (i, n) in enumerate(zip(index, self.dims)):
            if not 0 <= i < n:
                raise ValueError(f"node index {index} out of range along axis {d}")
        return index

    def refined(self, factor: int) -> "Grid":
        dims = tuple(factor * (n - 1) + 1 for n in self.dims)
        return make_grid(dims, self.extent, self.ghost_layers)


def make_grid(dims, extent, ghost_layers: int = 2) -> Grid:
    dims = tuple(int(n) for n in dims)
    extent = tuple(float(e) for e in extent)
    if len(dims) != len(extent):
        raise ValueError("dims and extent must have the same length")
    if any(n <= 0 for n in dims) or any(not e > 0 for e in extent):
        raise ValueError("dims and extent entries must be positive")
    spacing = tuple(e / (n - 1) if n > 1 else math.inf for n, e in zip(dims, extent))
    return Grid(dims, spacing, extent, ghost_layers)


def grid_from_spacing(dims, spacing, ghost_layers: int = 2) -> Grid:
    """Grid with prescribed spacing; the extent follows from the node count."""
    dims = tuple(int(n) for n in dims)
    spacing = tuple(float(h) for h in spacing)
    extent = tuple(h * (n - 1) for n, h in zip(dims, spacing))
    return Grid(dims, spacing, extent, ghost_layers)


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = _readonly(self.values)
        if vals.shape != self.grid.shape:
            raise ValueError(f"field shape {vals.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def full(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)


@dataclass(frozen=True)
class MaterialModel:
    rho0: float = 2700.0
    c0: float = 6000.0
    eps: float = 1e-5
    upper: float = 1.0

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not self.c0 > 0:
            raise ValueError("c0 must be positive")
        if not (0 < self.eps < self.upper <= 1.5):
            raise ValueError("require 0 < eps < upper <= 1.5")


@dataclass(frozen=True)
class TimeAxis:
    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.n_steps) < 1:
            raise ValueError("n_steps must be >= 1")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    def courant(self, grid: Grid, c0: float) -> float:
        return c0 * self.dt * math.sqrt(sum(1.0 / h**2 for h in grid.spacing))

    def refined(self, factor: int) -> "TimeAxis":
        return TimeAxis(self.dt / factor, self.n_steps * factor)


def clip_indicator(field, eps: float, upper: float):
    """Clip ``|field|`` into ``[eps, upper]``.

    Accepts a :class:`ScalarField` or a bare array and returns the same kind.
    """
    if not (0 < eps < upper):
        raise ValueError("require 0 < eps < upper")
    if isinstance(field, ScalarField):
        return field.with_values(np.clip(np.abs(field.values), eps, upper))
    return np.clip(np.abs(np.asarray(field, dtype=np.float64)), eps, upper)


def field_mse(a: ScalarField, b: ScalarField) -> float:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    diff = a.values - b.values
    return float(np.mean(diff * diff))
