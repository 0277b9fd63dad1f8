"""Piecewise-constant voxel parameterisation of the indicator field."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, ScalarField, clip_indicator


@dataclass
class ConstantAnsatz:
    """One coefficient per voxel of ``voxel`` nodes along each axis.

    Coefficients are mutable optimisation state; :meth:`clip` projects
    them back to ``[eps, upper]`` after an update.
    """

    grid: Grid
    coefficients: np.ndarray = field(repr=False)
    voxel: tuple[int, ...] = (1, 1)
    eps: float = 1e-5
    upper: float = 1.0

    def __post_init__(self):
        self.voxel = tuple(int(v) for v in self.voxel)
        if len(self.voxel) != self.grid.ndim:
            raise ValueError("voxel layout dimensionality does not match the grid")
        for n, v in zip(self.grid.dims, self.voxel):
            if v < 1 or n % v:
                raise ValueError(f"voxel size {v} does not tile {n} nodes")
        self.coefficients = np.array(self.coefficients, dtype=np.float64, copy=True)
        if self.coefficients.shape != self.layout:
            raise ValueError(f"coefficient shape {self.coefficients.shape} != layout {self.layout}")

    @classmethod
    def uniform(cls, grid: Grid, value: float = 1.0, voxel=None, eps=1e-5, upper=1.0):
        voxel = tuple(voxel) if voxel is not None else (1,) * grid.ndim
        layout = tuple(n // v for n, v in zip(grid.dims, voxel))
        return cls(grid, np.full(layout, float(value)), voxel, eps, upper)

    @property
    def layout(self) -> tuple[int, ...]:
        return tuple(n // v for n, v in zip(self.grid.dims, self.voxel))

    @property
    def n_params(self) -> int:
        return int(self.coefficients.size)

    def clip(self) -> None:
        self.coefficients = clip_indicator(self.coefficients, self.eps, self.upper)

    def copy(self) -> "ConstantAnsatz":
        return ConstantAnsatz(self.grid, self.coefficients, self.voxel, self.eps, self.upper)


def eval_constant(ansatz: ConstantAnsatz) -> ScalarField:
    vals = clip_indicator(ansatz.coefficients, ansatz.eps, ansatz.upper)
    for axis, v in enumerate(ansatz.voxel):
        vals = np.repeat(vals, v, axis=axis)
    return ScalarField(ansatz.grid, vals)


def voxel_sum(nodal: np.ndarray, voxel) -> np.ndarray:
    """Sum nodal values over each voxel block."""
    nodal = np.asarray(nodal)
    shape = []
    for n, v in zip(nodal.shape, voxel):
        if n % v:
            raise ValueError("voxel layout does not tile the field")
        shape += [n // v, v]
    return nodal.reshape(shape).sum(axis=tuple(range(1, 2 * nodal.ndim, 2)))


def gradient_wrt_coeffs(kernel: ScalarField, ansatz: ConstantAnsatz) -> np.ndarray:
    """Integrate a sensitivity density over every voxel's support.

    Nodal quadrature: the sum of density values on the voxel's nodes times
    the cell volume.
    """
    if kernel.grid.shape != ansatz.grid.shape:
        raise ValueError("kernel grid does not match the voxel layout")
    return voxel_sum(kernel.values, ansatz.voxel) * kernel.grid.cell_volume


chain_to_coeffs = gradient_wrt_coeffs
