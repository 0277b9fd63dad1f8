"""Compiled vs pure-numpy stencil kernels, plus one end-to-end forward run.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Prints microseconds per call for each kernel and shape, and the speedup.
"""
import argparse
import timeit

import numpy as np

from hybridfwi import kernels
from hybridfwi.data import desk_geometry
from hybridfwi.forward import run_forward
from hybridfwi.grid import ScalarField

SHAPES = [(64, 32), (252, 124), (48, 48, 48)]


def bench_shape(shape, repeat):
    rng = np.random.default_rng(0)
    gamma = 0.2 + 0.8 * rng.random(shape)
    kappa = (0.1,) * len(shape)
    u_prev, u = rng.standard_normal(shape), rng.standard_normal(shape)
    lam, lc, lp = (rng.standard_normal(shape) for _ in range(3))
    out, gbar = np.empty(shape), np.zeros(shape)
    fw = kernels.face_weights(gamma, kappa)
    jobs = {
        "step": lambda: kernels.step(u_prev, u, fw, out),
        "laplacian": lambda: kernels.laplacian(u, fw, out),
        "reverse": lambda: kernels.reverse(lam, lc.copy(), lp.copy(), u, fw, gbar),
    }
    res = {}
    for name, fn in jobs.items():
        fn()
        res[name] = min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e6
    return res


def bench_forward():
    grid, mat, time, sources, sensors = desk_geometry()
    one = ScalarField.full(grid, 1.0)
    return min(timeit.repeat(lambda: run_forward(one, mat, time, sources[0], sensors),
                             number=1, repeat=3))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = ["python"] + (["compiled"] if kernels.COMPILED_AVAILABLE else [])
    if len(backends) == 1:
        print("compiled kernels not built; timing the numpy backend only")
    prev = kernels.backend()
    rows, fwd = {}, {}
    try:
        for b in backends:
            kernels.use_backend(b)
            for shape in SHAPES:
                for k, v in bench_shape(shape, args.repeat).items():
                    rows.setdefault((k, shape), {})[b] = v
            fwd[b] = bench_forward()
    finally:
        kernels.use_backend(prev)

    print(f"{'kernel':<10} {'shape':<14} " + " ".join(f"{b + ' us':>13}" for b in backends)
          + ("   speedup" if len(backends) > 1 else ""))
    for (k, shape), t in rows.items():
        line = f"{k:<10} {'x'.join(map(str, shape)):<14} " + " ".join(f"{t[b]:13.1f}" for b in backends)
        if len(backends) > 1:
            line += f"   {t['python'] / t['compiled']:7.2f}x"
        print(line)
    line = f"{'forward':<10} {'64x32x300':<14} " + " ".join(f"{fwd[b] * 1e6:13.1f}" for b in backends)
    if len(backends) > 1:
        line += f"   {fwd['python'] / fwd['compiled']:7.2f}x"
    print(line)


if __name__ == "__main__":
    main()
