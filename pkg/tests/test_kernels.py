import numpy as np
import pytest

from hybridfwi import kernels


def textbook_step(u_prev, u, kappa):
    """Constant-coefficient leapfrog with mirror ghosts, written independently."""
    nd = u.ndim
    up = np.pad(u, 1, mode="reflect")
    out = 2.0 * u - u_prev
    centre = (slice(1, -1),) * nd
    for d in range(nd):
        lo = list(centre)
        hi = list(centre)
        lo[d] = slice(0, -2)
        hi[d] = slice(2, None)
        out = out + kappa[d] * (up[tuple(hi)] - 2.0 * u + up[tuple(lo)])
    return out


@pytest.mark.parametrize("shape", [(9, 7), (5, 6, 4)])
def test_homogeneous_step_matches_textbook(each_backend, shape):
    rng = np.random.default_rng(0)
    kappa = tuple(0.1 + 0.05 * d for d in range(len(shape)))
    u_prev, u = rng.standard_normal(shape), rng.standard_normal(shape)
    for g0 in (1.0, 0.37):
        fw = kernels.face_weights(np.full(shape, g0), kappa)
        out = np.empty(shape)
        kernels.step(u_prev, u, fw, out)
        assert np.abs(out - textbook_step(u_prev, u, kappa)).max() <= 1e-13


def test_spike_response():
    g = np.ones((5, 5))
    fw = kernels.face_weights(g, (0.25, 0.25))
    u = np.zeros((5, 5))
    u[2, 2] = 1.0
    out = np.empty_like(u)
    kernels.step(np.zeros_like(u), u, fw, out)
    assert out[2, 2] == pytest.approx(1.0)
    assert out[1, 2] == out[3, 2] == out[2, 1] == out[2, 3] == pytest.approx(0.25)
    kernels.step(u, u, fw, out)
    assert out[2, 2] == pytest.approx(0.0)


def test_harmonic_face_weights():
    g = np.array([[1.0, 1.0, 1.0], [0.2, 0.2, 0.2], [1.0, 1.0, 1.0]])
    fw = kernels.face_weights(g, (1.0, 1.0))
    # 2 * H(1, 0.2) = 2 * 0.2 / 1.2
    assert fw.w[0][0, 0] == pytest.approx(2 * 0.2 / 1.2)
    assert np.allclose(fw.invg, 1.0 / g)
    # the face derivatives match central differences of the weight
    h = 1e-7
    g2 = g.copy()
    g2[1, 0] += h
    fw2 = kernels.face_weights(g2, (1.0, 1.0))
    assert (fw2.w[0][0, 0] - fw.w[0][0, 0]) / h == pytest.approx(fw.dhi[0][0, 0], rel=1e-5)


def test_laplacian_annihilates_constants(each_backend):
    rng = np.random.default_rng(1)
    g = 0.2 + rng.random((8, 6))
    fw = kernels.face_weights(g, (0.3, 0.2))
    assert np.abs(kernels.laplacian(np.full((8, 6), 3.0), fw)).max() < 1e-14


@pytest.mark.parametrize("shape", [(8, 6), (5, 4, 6)])
def test_operator_symmetric_under_trapezoid_weights(shape):
    rng = np.random.default_rng(2)
    g = 0.2 + rng.random(shape)
    fw = kernels.face_weights(g, (0.3,) * len(shape))
    q = np.ones(shape)
    for d, n in enumerate(shape):
        w = np.ones(n)
        w[0] = w[-1] = 0.5
        q = q * w.reshape([-1 if i == d else 1 for i in range(len(shape))])
    u, v = rng.standard_normal(shape), rng.standard_normal(shape)
    a = np.sum(q * v * kernels.laplacian(u, fw))
    b = np.sum(q * u * kernels.laplacian(v, fw))
    assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.skipif(not kernels.COMPILED_AVAILABLE, reason="compiled kernels not built")
@pytest.mark.parametrize("shape", [(11, 7), (6, 5, 7)])
def test_backends_agree(shape):
    rng = np.random.default_rng(4)
    g = 0.1 + rng.random(shape)
    kappa = (0.2,) * len(shape)
    fw = kernels.face_weights(g, kappa)
    u_prev, u, lam, cur0 = (rng.standard_normal(shape) for _ in range(4))
    res = {}
    prev = kernels.backend()
    try:
        for name in ("python", "compiled"):
            kernels.use_backend(name)
            out = np.empty(shape)
            kernels.step(u_prev, u, fw, out)
            cur, pre, gb = cur0.copy(), np.zeros(shape), np.zeros(shape)
            kernels.reverse(lam, cur, pre, u, fw, gb)
            res[name] = (out, cur - cur0, pre, gb)
    finally:
        kernels.use_backend(prev)
    for a, b in zip(res["python"], res["compiled"]):
        assert np.allclose(a, b, rtol=1e-13, atol=1e-13 * np.abs(a).max())


def test_use_backend_validation():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")
    prev = kernels.use_backend("python")
    assert kernels.backend() == "python"
    kernels.use_backend(prev)
