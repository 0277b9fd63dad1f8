"""Backend selection for the hot stencil kernels.

The compiled extension ``_ckernels`` is used when it was built and the
environment variable ``HYBRIDFWI_BACKEND`` is not set to ``python``.
Both backends expose the same three operations on C-contiguous float64
arrays; :func:`use_backend` switches at runtime (tests, benchmarks).
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

COMPILED_AVAILABLE = _ckernels is not None


def _default_backend() -> str:
    requested = os.environ.get("HYBRIDFWI_BACKEND", "").strip().lower()
    if requested == "python" or not COMPILED_AVAILABLE:
        return "python"
    return "compiled"


_backend = _default_backend()


def backend() -> str:
    return _backend


def use_backend(name: str) -> str:
    """Select ``"compiled"`` or ``"python"``; returns the previous backend."""
    global _backend
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and not COMPILED_AVAILABLE:
        raise RuntimeError("compiled kernels are not built")
    previous, _backend = _backend, name
    return previous


@dataclass(frozen=True)
class FaceWeights:
    """Per-indicator stencil coefficients, computed once per gamma.

    ``w[d]`` is ``2 kappa_d H(g_lo, g_hi)`` on the faces normal to axis d;
    ``dlo[d]``/``dhi[d]`` are its partial derivatives w.r.t. the low and
    high node's indicator.
    """

    invg: np.ndarray
    w: tuple
    dlo: tuple
    dhi: tuple


def face_weights(gamma: np.ndarray, kappa) -> FaceWeights:
    g = np.ascontiguousarray(gamma, dtype=np.float64)
    nd = g.ndim
    w, dlo, dhi = [], [], []
    for d in range(nd):
        lo = [slice(None)] * nd
        hi = [slice(None)] * nd
        lo[d] = slice(None, -1)
        hi[d] = slice(1, None)
        a, b = g[tuple(lo)], g[tuple(hi)]
        s = a + b
        k2 = 2.0 * kappa[d]
        w.append(np.ascontiguousarray(k2 * (a * b / s)))
        dlo.append(np.ascontiguousarray(k2 * (b * b) / (s * s)))
        dhi.append(np.ascontiguousarray(k2 * (a * a) / (s * s)))
    return FaceWeights(np.ascontiguousarray(1.0 / g), tuple(w), tuple(dlo), tuple(dhi))


def laplacian(u: np.ndarray, fw: FaceWeights, out: np.ndarray | None = None) -> np.ndarray:
    """Weighted flux sum ``sum_d (face differences)`` with mirrored ghosts."""
    if out is None:
        out = np.empty_like(u)
    if _backend == "compiled":
        if u.ndim == 2:
            _ckernels.laplacian2d(u, *fw.w, out)
        else:
            _ckernels.laplacian3d(u, *fw.w, out)
        return out
    return _pykernels.laplacian(u, fw.w, out)


def step(u_prev: np.ndarray, u: np.ndarray, fw: FaceWeights, out: np.ndarray) -> np.ndarray:
    """Source-free leapfrog update ``2u - u_prev + laplacian(u)/gamma``."""
    if _backend == "compiled":
        if u.ndim == 2:
            _ckernels.step2d(u_prev, u, fw.invg, *fw.w, out)
        else:
            _ckernels.step3d(u_prev, u, fw.invg, *fw.w, out)
        return out
    return _pykernels.step(u_prev, u, fw.invg, fw.w, out)


def reverse(lam, lam_curr, lam_prev, u, fw: FaceWeights, gbar) -> None:
    """Accumulate the transpose of :func:`step` applied to ``lam``."""
    if _backend == "compiled":
        derivs = [x for pair in zip(fw.dlo, fw.dhi) for x in pair]
        if u.ndim == 2:
            _ckernels.reverse2d(lam, lam_curr, lam_prev, u, fw.invg, *fw.w, *derivs, gbar)
        else:
            _ckernels.reverse3d(lam, lam_curr, lam_prev, u, fw.invg, *fw.w, *derivs, gbar)
        return
    _pykernels.reverse(lam, lam_curr, lam_prev, u, fw.invg, fw.w, fw.dlo, fw.dhi, gbar)
