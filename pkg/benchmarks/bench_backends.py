#!/usr/bin/env python3
"""Time the numba kernels against their numpy fallbacks.

Usage:  python benchmarks/bench_backends.py [--repeat 5]

Kernels are timed directly, then two end-to-end workloads (a pointwise
soliton report and a short cigar flow) are run once per backend by flipping
``rblab._accel.USE_NUMBA``; ``RBLAB_NUMBA=0`` selects the same fallback
for a whole process.
"""
import argparse
import time

import numpy as np

from rblab import _accel, catalog, rbflow
from rblab.jets import jet_space
from rblab.soliton import soliton_residual


def best_of(fn, repeat):
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_rows(repeat):
    rng = np.random.default_rng(0)
    sp = jet_space(2, 3)
    a = rng.standard_normal((20000, sp.size))
    b = rng.standard_normal((20000, sp.size))
    args = (a, b, sp.left, sp.right, sp.target)
    ref = _accel.jet_mul_numpy(*args, sp.scatter)
    assert np.allclose(_accel.jet_mul_numba(*args), ref, rtol=1e-13, atol=1e-13)
    yield ("jet product 2D/order3 x20000",
           best_of(lambda: _accel.jet_mul_numpy(*args, sp.scatter), repeat),
           best_of(lambda: _accel.jet_mul_numba(*args), repeat))

    u = rng.standard_normal((257, 257)) * 0.1
    E = np.exp(-2 * u)
    for periodic in (True, False):
        ref = _accel.scaled_laplacian_numpy(u, E, 1.0, 1024.0, periodic)
        assert np.allclose(_accel.scaled_laplacian_numba(u, E, 1.0, 1024.0, periodic), ref, rtol=1e-13, atol=1e-10)
        yield (f"stencil 257^2 periodic={periodic}",
               best_of(lambda: _accel.scaled_laplacian_numpy(u, E, 1.0, 1024.0, periodic), repeat),
               best_of(lambda: _accel.scaled_laplacian_numba(u, E, 1.0, 1024.0, periodic), repeat))


def end_to_end_rows():
    workloads = {
        "soliton report, sphere 20x20": lambda: soliton_residual(catalog.round_sphere_soliton()),
        "cigar flow h=1/16, T=0.02": lambda: rbflow.run(rbflow.cigar_state(1 / 16), 0.02),
    }
    saved = _accel.USE_NUMBA
    try:
        for name, fn in workloads.items():
            out = []
            for flag in (False, True):
                _accel.USE_NUMBA = flag
                fn()
                t0 = time.perf_counter()
                fn()
                out.append(time.perf_counter() - t0)
            yield (name, *out)
    finally:
        _accel.USE_NUMBA = saved


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAS_NUMBA:
        print("numba is not installed; only the numpy path exists")
        return
    print(f"{'workload':40s} {'numpy [s]':>12s} {'numba [s]':>12s} {'speedup':>8s}")
    for name, t_np, t_nb in list(kernel_rows(args.repeat)) + list(end_to_end_rows()):
        print(f"{name:40s} {t_np:12.5f} {t_nb:12.5f} {t_np / t_nb:8.2f}")


if __name__ == "__main__":
    main()
