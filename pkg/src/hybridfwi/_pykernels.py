"""Vectorised numpy stencil kernels (fallback backend).

Face weights are precomputed per indicator field: ``faces[d]`` has the
shape of the grid with axis ``d`` shortened by one and holds
``2 * kappa_d * H(g_lo, g_hi)`` where ``H(a, b) = (1/a + 1/b)**-1``.
Ghost nodes mirror the first interior neighbour, which doubles the single
real face of every node on the low/high end of an axis.
"""
import numpy as np


def _sl(ndim, axis, s):
    idx = [slice(None)] * ndim
    idx[axis] = s
    return tuple(idx)


def laplacian(u, faces, out):
    out[...] = 0.0
    nd = u.ndim
    for d, w in enumerate(faces):
        lo, hi = _sl(nd, d, slice(None, -1)), _sl(nd, d, slice(1, None))
        flux = w * (u[hi] - u[lo])
        c = np.zeros_like(u)
        c[lo] += flux
        c[hi] -= flux
        c[_sl(nd, d, 0)] *= 2.0
        c[_sl(nd, d, -1)] *= 2.0
        out += c
    return out


def step(u_prev, u, invg, faces, out):
    lap = laplacian(u, faces, np.empty_like(u))
    np.multiply(invg, lap, out=out)
    out += 2.0 * u
    out -= u_prev
    return out


def reverse(lam, lam_curr, lam_prev, u, invg, faces, dfaces_lo, dfaces_hi, gbar):
    """Transpose of :func:`step` applied to the cotangent ``lam`` of its output.

    Accumulates into ``lam_curr`` (cotangent of ``u``), ``lam_prev``
    (cotangent of ``u_prev``) and ``gbar`` (cotangent of the indicator).
    """
    nd = u.ndim
    v = lam * invg
    lap = laplacian(u, faces, np.empty_like(u))
    gbar -= v * invg * lap
    lam_curr += 2.0 * lam
    for d, w in enumerate(faces):
        lo, hi = _sl(nd, d, slice(None, -1)), _sl(nd, d, slice(1, None))
        mv = v.copy()
        mv[_sl(nd, d, 0)] *= 2.0
        mv[_sl(nd, d, -1)] *= 2.0
        wf = mv[lo] - mv[hi]
        du = u[hi] - u[lo]
        gbar[lo] += wf * du * dfaces_lo[d]
        gbar[hi] += wf * du * dfaces_hi[d]
        t = w * wf
        lam_curr[hi] += t
        lam_curr[lo] -= t
    lam_prev -= lam
