# cython: language_level=3
"""Compiled stencil kernels; same algorithm and face conventions as _pykernels.

Every output entry is produced by a fixed sequence of floating-point
operations, so results are deterministic across runs.
"""
import numpy as np

ctypedef double f8


cdef inline f8 _lap2d(const f8[:, ::1] u, const f8[:, ::1] wx, const f8[:, ::1] wy,
                      Py_ssize_t i, Py_ssize_t j, Py_ssize_t nx, Py_ssize_t ny) nogil:
    cdef f8 cx = 0.0, cy = 0.0
    if i < nx - 1:
        cx += wx[i, j] * (u[i + 1, j] - u[i, j])
    if i > 0:
        cx -= wx[i - 1, j] * (u[i, j] - u[i - 1, j])
    if i == 0 or i == nx - 1:
        cx *= 2.0
    if j < ny - 1:
        cy += wy[i, j] * (u[i, j + 1] - u[i, j])
    if j > 0:
        cy -= wy[i, j - 1] * (u[i, j] - u[i, j - 1])
    if j == 0 or j == ny - 1:
        cy *= 2.0
    return cx + cy


cdef inline f8 _lap3d(const f8[:, :, ::1] u, const f8[:, :, ::1] wx,
                      const f8[:, :, ::1] wy, const f8[:, :, ::1] wz,
                      Py_ssize_t i, Py_ssize_t j, Py_ssize_t k,
                      Py_ssize_t nx, Py_ssize_t ny, Py_ssize_t nz) nogil:
    cdef f8 cx = 0.0, cy = 0.0, cz = 0.0
    if i < nx - 1:
        cx += wx[i, j, k] * (u[i + 1, j, k] - u[i, j, k])
    if i > 0:
        cx -= wx[i - 1, j, k] * (u[i, j, k] - u[i - 1, j, k])
    if i == 0 or i == nx - 1:
        cx *= 2.0
    if j < ny - 1:
        cy += wy[i, j, k] * (u[i, j + 1, k] - u[i, j, k])
    if j > 0:
        cy -= wy[i, j - 1, k] * (u[i, j, k] - u[i, j - 1, k])
    if j == 0 or j == ny - 1:
        cy *= 2.0
    if k < nz - 1:
        cz += wz[i, j, k] * (u[i, j, k + 1] - u[i, j, k])
    if k > 0:
        cz -= wz[i, j, k - 1] * (u[i, j, k] - u[i, j, k - 1])
    if k == 0 or k == nz - 1:
        cz *= 2.0
    return cx + cy + cz


def laplacian2d(const f8[:, ::1] u, const f8[:, ::1] wx, const f8[:, ::1] wy, f8[:, ::1] out):
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1], i, j
    with nogil:
        for i in range(nx):
            for j in range(ny):
                out[i, j] = _lap2d(u, wx, wy, i, j, nx, ny)


def laplacian3d(const f8[:, :, ::1] u, const f8[:, :, ::1] wx, const f8[:, :, ::1] wy,
                const f8[:, :, ::1] wz, f8[:, :, ::1] out):
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1], nz = u.shape[2], i, j, k
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    out[i, j, k] = _lap3d(u, wx, wy, wz, i, j, k, nx, ny, nz)


def step2d(const f8[:, ::1] u_prev, const f8[:, ::1] u, const f8[:, ::1] invg,
           const f8[:, ::1] wx, const f8[:, ::1] wy, f8[:, ::1] out):
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1], i, j
    with nogil:
        for i in range(nx):
            for j in range(ny):
                out[i, j] = invg[i, j] * _lap2d(u, wx, wy, i, j, nx, ny) + 2.0 * u[i, j] - u_prev[i, j]


def step3d(const f8[:, :, ::1] u_prev, const f8[:, :, ::1] u, const f8[:, :, ::1] invg,
           const f8[:, :, ::1] wx, const f8[:, :, ::1] wy, const f8[:, :, ::1] wz,
           f8[:, :, ::1] out):
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1], nz = u.shape[2], i, j, k
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    out[i, j, k] = (invg[i, j, k] * _lap3d(u, wx, wy, wz, i, j, k, nx, ny, nz)
                                    + 2.0 * u[i, j, k] - u_prev[i, j, k])


def reverse2d(const f8[:, ::1] lam, f8[:, ::1] lam_curr, f8[:, ::1] lam_prev,
              const f8[:, ::1] u, const f8[:, ::1] invg,
              const f8[:, ::1] wx, const f8[:, ::1] wy,
              const f8[:, ::1] dxlo, const f8[:, ::1] dxhi,
              const f8[:, ::1] dylo, const f8[:, ::1] dyhi,
              f8[:, ::1] gbar):
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1], i, j
    cdef f8 v, mlo, mhi, wf, du, t
    with nogil:
        # node terms
        for i in range(nx):
            for j in range(ny):
                v = lam[i, j] * invg[i, j]
                gbar[i, j] -= v * invg[i, j] * _lap2d(u, wx, wy, i, j, nx, ny)
                lam_curr[i, j] += 2.0 * lam[i, j]
                lam_prev[i, j] -= lam[i, j]
        # x faces
        for i in range(nx - 1):
            mlo = 2.0 if i == 0 else 1.0
            mhi = 2.0 if i + 1 == nx - 1 else 1.0
            for j in range(ny):
                wf = mlo * lam[i, j] * invg[i, j] - mhi * lam[i + 1, j] * invg[i + 1, j]
                du = u[i + 1, j] - u[i, j]
                gbar[i, j] += wf * du * dxlo[i, j]
                gbar[i + 1, j] += wf * du * dxhi[i, j]
                t = wx[i, j] * wf
                lam_curr[i + 1, j] += t
                lam_curr[i, j] -= t
        # y faces
        for i in range(nx):
            for j in range(ny - 1):
                mlo = 2.0 if j == 0 else 1.0
                mhi = 2.0 if j + 1 == ny - 1 else 1.0
                wf = mlo * lam[i, j] * invg[i, j] - mhi * lam[i, j + 1] * invg[i, j + 1]
                du = u[i, j + 1] - u[i, j]
                gbar[i, j] += wf * du * dylo[i, j]
                gbar[i, j + 1] += wf * du * dyhi[i, j]
                t = wy[i, j] * wf
                lam_curr[i, j + 1] += t
                lam_curr[i, j] -= t


def reverse3d(const f8[:, :, ::1] lam, f8[:, :, ::1] lam_curr, f8[:, :, ::1] lam_prev,
              const f8[:, :, ::1] u, const f8[:, :, ::1] invg,
              const f8[:, :, ::1] wx, const f8[:, :, ::1] wy, const f8[:, :, ::1] wz,
              const f8[:, :, ::1] dxlo, const f8[:, :, ::1] dxhi,
              const f8[:, :, ::1] dylo, const f8[:, :, ::1] dyhi,
              const f8[:, :, ::1] dzlo, const f8[:, :, ::1] dzhi,
              f8[:, :, ::1] gbar):
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1], nz = u.shape[2], i, j, k
    cdef f8 v, mlo, mhi, wf, du, t
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    v = lam[i, j, k] * invg[i, j, k]
                    gbar[i, j, k] -= v * invg[i, j, k] * _lap3d(u, wx, wy, wz, i, j, k, nx, ny, nz)
                    lam_curr[i, j, k] += 2.0 * lam[i, j, k]
                    lam_prev[i, j, k] -= lam[i, j, k]
        for i in range(nx - 1):
            mlo = 2.0 if i == 0 else 1.0
            mhi = 2.0 if i + 1 == nx - 1 else 1.0
            for j in range(ny):
                for k in range(nz):
                    wf = mlo * lam[i, j, k] * invg[i, j, k] - mhi * lam[i + 1, j, k] * invg[i + 1, j, k]
                    du = u[i + 1, j, k] - u[i, j, k]
                    gbar[i, j, k] += wf * du * dxlo[i, j, k]
                    gbar[i + 1, j, k] += wf * du * dxhi[i, j, k]
                    t = wx[i, j, k] * wf
                    lam_curr[i + 1, j, k] += t
                    lam_curr[i, j, k] -= t
        for i in range(nx):
            for j in range(ny - 1):
                mlo = 2.0 if j == 0 else 1.0
                mhi = 2.0 if j + 1 == ny - 1 else 1.0
                for k in range(nz):
                    wf = mlo * lam[i, j, k] * invg[i, j, k] - mhi * lam[i, j + 1, k] * invg[i, j + 1, k]
                    du = u[i, j + 1, k] - u[i, j, k]
                    gbar[i, j, k] += wf * du * dylo[i, j, k]
                    gbar[i, j + 1, k] += wf * du * dyhi[i, j, k]
                    t = wy[i, j, k] * wf
                    lam_curr[i, j + 1, k] += t
                    lam_curr[i, j, k] -= t
        for i in range(nx):
            for j in range(ny):
                for k in range(nz - 1):
                    mlo = 2.0 if k == 0 else 1.0
                    mhi = 2.0 if k + 1 == nz - 1 else 1.0
                    wf = mlo * lam[i, j, k] * invg[i, j, k] - mhi * lam[i, j, k + 1] * invg[i, j, k + 1]
                    du = u[i, j, k + 1] - u[i, j, k]
                    gbar[i, j, k] += wf * du * dzlo[i, j, k]
                    gbar[i, j, k + 1] += wf * du * dzhi[i, j, k]
                    t = wz[i, j, k] * wf
                    lam_curr[i, j, k + 1] += t
                    lam_curr[i, j, k] -= t
