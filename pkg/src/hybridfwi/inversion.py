"""Optimisation drivers for the four inversion strategies and evaluation metrics.

Strategies
    adjoint-constant   voxel coefficients, continuous adjoint-state gradient
    backprop-nn        generator network, exact reverse sweep through the solver
    hybrid             generator network, continuous adjoint-state gradient
    full-domain-pinn   generator network, finite-difference PDE residual on a
                       measured full wavefield with self-adaptive weights
"""
from __future__ import annotations

import csv
import logging
import math
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .adjoint import ResidualRecord, frechet_kernel, measurement_loss, run_adjoint
from .ansatz import ConstantAnsatz, chain_to_coeffs, eval_constant
from .backprop import loss_and_gradient
from .data import Problem
from .forward import propagate, run_forward, source_series, stencil_coefficients
from .grid import ScalarField, clip_indicator, field_mse
from .network import GeneratorNetwork, NetworkDivergence, network_backward, network_forward
from .optim import AdamState, adam_step, clip_gradient, lr_schedule

log = logging.getLogger(__name__)

STRATEGIES = ("adjoint-constant", "backprop-nn", "hybrid", "full-domain-pinn")
DEFAULT_LR = {
    "adjoint-constant": 6e-2,
    "backprop-nn": 2e-3,
    "hybrid": 4e-3,
    "full-domain-pinn": 2e-3,
}


class DivergenceError(FloatingPointError):
    """Non-finite loss or gradient during training."""


@dataclass
class TrainConfig:
    strategy: str = "adjoint-constant"
    epochs: int = 50
    alpha_min: float | None = None
    alpha_max: float = 2e-2
    a: float = -0.5
    b: float = 0.2
    clip: float = 1.0
    seed: int = 0
    voxel: tuple = (1, 1)
    channels: tuple = (32, 16, 16, 8)
    pixel_norm: bool = False
    trapezoid: bool = False
    workers: int = 1
    pinn_stride: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.alpha_min is None:
            self.alpha_min = DEFAULT_LR[self.strategy]
        if not self.alpha_min > 0:
            raise ValueError("alpha_min must be positive")
        if not self.alpha_max > 0:
            raise ValueError("alpha_max must be positive")
        if int(self.epochs) < 1:
            raise ValueError("epochs must be >= 1")
        if self.a > 0 or self.b < 0:
            raise ValueError("schedule requires a <= 0 and b >= 0")
        if not self.clip > 0:
            raise ValueError("clip threshold must be positive")
        if int(self.workers) < 1 or int(self.pinn_stride) < 1:
            raise ValueError("workers and pinn_stride must be >= 1")
        self.voxel = tuple(int(v) for v in self.voxel)
        self.channels = tuple(int(c) for c in self.channels)

    def lr(self, epoch: int) -> float:
        return lr_schedule(epoch, self.alpha_min, self.a, self.b)


HISTORY_COLUMNS = ("epoch", "cost", "cost_norm", "mse", "mse_norm", "lr", "grad_norm")


@dataclass
class TrainingHistory:
    """Per-epoch log.  Wall-clock times are kept apart from the deterministic rows."""

    rows: list = field(default_factory=list)
    wall: list = field(default_factory=list)
    diverged: bool = False

    def append(self, wall: float, **row) -> None:
        self.rows.append(tuple(row[c] for c in HISTORY_COLUMNS))
        self.wall.append(wall)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        i = HISTORY_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def write(self, path, timing_path=None) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HISTORY_COLUMNS)
            for r in self.rows:
                w.writerow([str(int(r[0]))] + [repr(float(x)) for x in r[1:]])
        if timing_path is not None:
            with open(timing_path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(("epoch", "wall_time"))
                for i, t in enumerate(self.wall):
                    w.writerow((i, repr(float(t))))

    @classmethod
    def read(cls, path) -> "TrainingHistory":
        hist = cls()
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = tuple(next(rd))
            if header != HISTORY_COLUMNS:
                raise ValueError(f"unexpected history header {header}")
            for row in rd:
                hist.rows.append((int(row[0]),) + tuple(float(x) for x in row[1:]))
                hist.wall.append(float("nan"))
        return hist


# -- parameterisations ------------------------------------------------------------

class _ConstantParams:
    def __init__(self, ansatz: ConstantAnsatz):
        self.ansatz = ansatz

    @property
    def params(self):
        return [self.ansatz.coefficients]

    def field(self):
        return eval_constant(self.ansatz), None

    def grad(self, cache, density: ScalarField):
        return [chain_to_coeffs(density, self.ansatz)]

    def after_update(self):
        self.ansatz.clip()


class _NetworkParams:
    def __init__(self, net: GeneratorNetwork):
        self.net = net

    @property
    def params(self):
        return self.net.params

    def field(self):
        return network_forward(self.net)

    def grad(self, cache, density: ScalarField):
        up = density.values * density.grid.cell_volume
        return network_backward(self.net, cache, up).grads

    def after_update(self):
        self.net.touch()


def _ratio(x: float, ref: float) -> float:
    """``x / ref``; nan when the reference is zero (data consistent with gamma = 1)."""
    return x / ref if ref != 0.0 else math.nan


def make_network(problem: Problem, cfg: TrainConfig) -> GeneratorNetwork:
    return GeneratorNetwork.for_grid(problem.grid, cfg.channels, eps=problem.material.eps,
                                     pixel_norm=cfg.pixel_norm, seed=cfg.seed)


def _map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def misfit_and_density(gamma: ScalarField, problem: Problem, engine: str,
                       trapezoid: bool = False, workers: int = 1):
    """Source-averaged misfit and its sensitivity density w.r.t. gamma."""
    mat, tax = problem.material, problem.time

    def one(k):
        src, data = problem.sources[k], problem.data[k]
        if engine == "adjoint":
            hist, shot = run_forward(gamma, mat, tax, src, problem.sensors, store_history=True)
            loss = measurement_loss(shot, data, trapezoid)
            adj = run_adjoint(gamma, mat, tax, ResidualRecord.from_records(shot, data), trapezoid)
            return loss, frechet_kernel(hist, adj, mat, trapezoid).values
        loss, grad = loss_and_gradient(gamma, mat, tax, src, problem.sensors, data, trapezoid)
        return loss, grad.values / gamma.grid.cell_volume

    results = _map(one, range(len(problem.sources)), workers)
    n = len(results)
    loss = sum(r[0] for r in results) / n
    dens = sum(r[1] for r in results) / n
    return loss, ScalarField(gamma.grid, dens)


def misfit(gamma: ScalarField, problem: Problem, trapezoid: bool = False) -> float:
    total = 0.0
    for src, data in zip(problem.sources, problem.data):
        _, shot = run_forward(gamma, problem.material, problem.time, src, problem.sensors)
        total += measurement_loss(shot, data, trapezoid)
    return total / len(problem.sources)


def invert(strategy: str, problem: Problem, cfg: TrainConfig | None = None, init=None):
    """Run ``cfg.epochs`` Adam epochs; returns ``(ansatz, TrainingHistory)``.

    ``init`` optionally supplies a ConstantAnsatz or GeneratorNetwork to
    start from.  Row ``e`` of the history describes the state *before*
    update ``e``.  A non-finite loss stops training with the history intact
    and ``history.diverged`` set.
    """
    cfg = cfg or TrainConfig(strategy=strategy)
    if cfg.strategy != strategy:
        cfg = TrainConfig(**{**cfg.__dict__, "strategy": strategy, "alpha_min": None})
    if strategy == "full-domain-pinn":
        raise ValueError("use full_domain_pinn_invert for the collocation strategy")
    mat, grid = problem.material, problem.grid
    if strategy == "adjoint-constant":
        ans = init if init is not None else ConstantAnsatz.uniform(
            grid, 1.0, cfg.voxel, mat.eps, mat.upper)
        state = _ConstantParams(ans)
    else:
        state = _NetworkParams(init if init is not None else make_network(problem, cfg))
    engine = "backprop" if strategy == "backprop-nn" else "adjoint"

    ones = ScalarField.full(grid, 1.0)
    cost_ref = misfit(ones, problem, cfg.trapezoid)
    mse_ref = field_mse(ones, problem.truth) if problem.truth is not None else float("nan")
    adam = AdamState.zeros_like(state.params)
    hist = TrainingHistory()
    t0 = _time.perf_counter()
    for epoch in range(cfg.epochs):
        try:
            gamma, cache = state.field()
        except NetworkDivergence:
            hist.diverged = True
            break
        cost, dens = misfit_and_density(gamma, problem, engine, cfg.trapezoid, cfg.workers)
        if not math.isfinite(cost) or not np.all(np.isfinite(dens.values)):
            hist.diverged = True
            log.warning("non-finite loss at epoch %d; stopping", epoch)
            break
        grads = state.grad(cache, dens)
        grads, gnorm = clip_gradient(grads, cfg.clip)
        lr = cfg.lr(epoch)
        mse = field_mse(gamma, problem.truth) if problem.truth is not None else float("nan")
        hist.append(_time.perf_counter() - t0, epoch=epoch, cost=cost, cost_norm=_ratio(cost, cost_ref),
                    mse=mse, mse_norm=_ratio(mse, mse_ref), lr=lr, grad_norm=gnorm)
        log.info("%s epoch %d cost %.4e mse %.4e", strategy, epoch, _ratio(cost, cost_ref), _ratio(mse, mse_ref))
        adam_step(adam, state.params, grads, lr)
        state.after_update()
    return (state.ansatz if strategy == "adjoint-constant" else state.net), hist


def current_field(ansatz) -> ScalarField:
    if isinstance(ansatz, ConstantAnsatz):
        return eval_constant(ansatz)
    return network_forward(ansatz)[0]


# -- full-domain collocation ----------------------------------------------------------

@dataclass
class PenaltyWeights:
    """One nonnegative weight per strict-interior node, shared by all time levels."""

    values: np.ndarray

    @classmethod
    def ones(cls, interior_shape) -> "PenaltyWeights":
        return cls(np.ones(interior_shape))

    def __post_init__(self):
        self.values = np.array(self.values, dtype=np.float64)
        if np.any(self.values < 0):
            raise ValueError("penalty weights must be nonnegative")


@dataclass(frozen=True)
class WavefieldProblem:
    """Measured full wavefields (one per source) on the inversion grid."""

    grid: object
    material: object
    time: object
    sources: tuple
    wavefields: tuple
    truth: ScalarField | None = None


def wavefield_problem(grid, material, time, sources, truth: ScalarField) -> WavefieldProblem:
    """Collocation data: the solver's own full wavefield for every source."""
    fields = []
    for src in sources:
        hist, _ = propagate(truth, grid, material, time,
                            point_sources=[(src.position, source_series(src, grid, time))],
                            store_history=True)
        fields.append(hist.snapshots)
    return WavefieldProblem(grid, material, time, tuple(sources), tuple(fields), truth)


def _interior(nd):
    return (slice(1, -1),) * nd


def pinn_residual(gamma: np.ndarray, u: np.ndarray, force: np.ndarray, kappa, beta, stride: int = 1):
    """Stencil residual ``(u+ - 2u + u-) - (L_gamma u + beta f) / gamma`` at interior nodes.

    This is the defect of the solver's own update, so the flux part does not
    change when gamma is scaled uniformly and only the pinned boundary and
    the source fix the absolute level.  Returns ``(R, P, levels)`` over time
    levels ``1, 1+stride, ...`` up to ``N-1`` where ``P = L_gamma u + beta f``.
    """
    fw = kernels.face_weights(gamma, kappa)
    levels = range(1, u.shape[0] - 1, stride)
    ins = _interior(gamma.ndim)
    R = np.empty((len(levels),) + tuple(n - 2 for n in gamma.shape))
    A = np.empty_like(R)
    lap = np.empty(gamma.shape)
    for k, n in enumerate(levels):
        acc = u[n + 1] - 2.0 * u[n] + u[n - 1]
        kernels.laplacian(np.ascontiguousarray(u[n]), fw, lap)
        A[k] = lap[ins] + beta * force[n][ins]
        R[k] = acc[ins] - A[k] / gamma[ins]
    return R, A, list(levels)


def _pinn_grad_gamma(gamma, u, levels, rho, A, kappa):
    """d/dgamma of sum_k sum_i rho[k,i] R[k,i] for residuals from :func:`pinn_residual`."""
    nd = gamma.ndim
    ins = _interior(nd)
    g = np.zeros(gamma.shape)
    gi = gamma[ins]
    g[ins] += np.sum(rho * A, axis=0) / (gi * gi)
    full = np.zeros((len(levels),) + gamma.shape)
    full[(slice(None),) + ins] = rho / gi
    for d in range(nd):
        lo = [slice(None)] * nd
        hi = [slice(None)] * nd
        lo[d], hi[d] = slice(None, -1), slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        a, b = gamma[lo], gamma[hi]
        s2 = (a + b) ** 2
        dlo = 2.0 * kappa[d] * b * b / s2
        dhi = 2.0 * kappa[d] * a * a / s2
        # flux F = w (u_hi - u_lo) enters L at lo with +1 and at hi with -1;
        # R = ... - L, hence dR/dw contributes -(rho_lo - rho_hi) du
        q = np.zeros(a.shape)
        for k, n in enumerate(levels):
            du = u[n][hi] - u[n][lo]
            q += (full[k][lo] - full[k][hi]) * du
        g[lo] -= q * dlo
        g[hi] -= q * dhi
    return g


def full_domain_pinn_invert(problem: WavefieldProblem, cfg: TrainConfig | None = None, init=None):
    """Generator-network inversion against the finite-difference PDE residual.

    Alternates an Adam descent step on the network parameters (rate
    ``alpha_min``) with a plain ascent step on the penalty weights (rate
    ``alpha_max``).  Boundary nodes of the indicator are fixed to 1.
    Returns ``(network, history, weights, initial_residual)`` where
    ``initial_residual`` is the time-integrated squared residual per
    interior node at epoch 0.
    """
    cfg = cfg or TrainConfig(strategy="full-domain-pinn")
    grid, mat, tax = problem.grid, problem.material, problem.time
    kappa, beta = stencil_coefficients(grid, mat, tax)
    net = init if init is not None else GeneratorNetwork.for_grid(
        grid, cfg.channels, eps=mat.eps, pixel_norm=cfg.pixel_norm, seed=cfg.seed)
    ins = _interior(grid.ndim)
    boundary = grid.boundary_mask()

    forces = []
    for src, wf in zip(problem.sources, problem.wavefields):
        if wf.shape != (tax.n_steps + 1, *grid.shape):
            raise ValueError("wavefield does not match grid/time axis")
        f = np.zeros(wf.shape)
        f[(slice(None),) + grid.check_index(src.position)] = source_series(src, grid, tax)
        forces.append(f)

    lam = PenaltyWeights.ones(tuple(n - 2 for n in grid.shape))
    # per-source residual scale: RMS of the discrete second time difference
    scales = []
    for wf in problem.wavefields:
        acc = wf[2:] - 2.0 * wf[1:-1] + wf[:-2]
        scales.append(float(np.sqrt(np.mean(acc[(slice(None),) + ins] ** 2))) or 1.0)

    def evaluate(gvals, need_grad=True):
        loss, dlam = 0.0, np.zeros(lam.values.shape)
        ggam = np.zeros(grid.shape)
        n_pts = 0
        for wf, f, s in zip(problem.wavefields, forces, scales):
            R, A, levels = pinn_residual(gvals, wf, f, kappa, beta, cfg.pinn_stride)
            R /= s
            n_pts += R.size
            sq = np.sum(R * R, axis=0)
            loss += float(np.sum(lam.values * sq))
            dlam += sq
            if need_grad:
                rho = (lam.values * R) / s
                ggam += _pinn_grad_gamma(gvals, wf, levels, rho, A, kappa)
        c = 1.0 / (2.0 * n_pts)
        return c * loss, c * dlam, 2.0 * c * ggam

    def pinned(field_vals):
        g = np.array(field_vals, copy=True)
        g[boundary] = 1.0
        return g

    ones = np.ones(grid.shape)
    cost_ref = evaluate(ones, need_grad=False)[0]
    truth = problem.truth
    mse_ref = field_mse(ScalarField(grid, ones), truth) if truth is not None else float("nan")
    adam = AdamState.zeros_like(net.params)
    hist = TrainingHistory()
    initial_sq = None
    t0 = _time.perf_counter()
    for epoch in range(cfg.epochs):
        try:
            gam_hat, cache = network_forward(net)
        except NetworkDivergence:
            hist.diverged = True
            break
        gvals = pinned(gam_hat.values)
        loss, dlam, ggam = evaluate(gvals)
        if initial_sq is None:
            initial_sq = dlam.copy()
        if not math.isfinite(loss):
            hist.diverged = True
            break
        ggam[boundary] = 0.0
        grads = network_backward(net, cache, ggam).grads
        grads, gnorm = clip_gradient(grads, cfg.clip)
        lr = cfg.lr(epoch)
        gfield = ScalarField(grid, gvals)
        mse = field_mse(gfield, truth) if truth is not None else float("nan")
        hist.append(_time.perf_counter() - t0, epoch=epoch, cost=loss, cost_norm=_ratio(loss, cost_ref),
                    mse=mse, mse_norm=_ratio(mse, mse_ref), lr=lr, grad_norm=gnorm)
        log.info("pinn epoch %d cost %.4e mse %.4e", epoch, _ratio(loss, cost_ref), _ratio(mse, mse_ref))
        adam_step(adam, net.params, grads, lr)
        net.touch()
        lam.values += cfg.alpha_max * dlam
    return net, hist, lam, initial_sq


def pinn_field(net: GeneratorNetwork) -> ScalarField:
    g = np.array(network_forward(net)[0].values, copy=True)
    g[net.grid.boundary_mask()] = 1.0
    return ScalarField(net.grid, g)


# -- metrics --------------------------------------------------------------------------

def gradient_norm_field(field: ScalarField) -> np.ndarray:
    grads = np.gradient(field.values, *field.grid.spacing)
    return np.sqrt(sum(g * g for g in grads))


def sharpness_metric(field: ScalarField, threshold: float):
    """Returns ``(norm_field, mean_above, empty)``; ``mean_above`` is 0 when nothing exceeds."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    norm = gradient_norm_field(field)
    sel = norm[norm > threshold]
    if sel.size == 0:
        return norm, 0.0, True
    return norm, float(sel.mean()), False


def normalized_mse(field: ScalarField, truth: ScalarField) -> float:
    return field_mse(field, truth) / field_mse(ScalarField.full(truth.grid, 1.0), truth)
