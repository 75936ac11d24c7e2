"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from xpmchannel import _kernels_py

try:
    from xpmchannel import _kernels
except ImportError:
    _kernels = None


def loglik_case(ny, nx, nu, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(ny) + 1j * rng.standard_normal(ny)
    x = rng.standard_normal(nx) + 1j * rng.standard_normal(nx)
    u = np.linspace(-np.pi, np.pi, nu, endpoint=False)
    return y, x, u, np.full(nu, -np.log(nu)), 0.1


def rotate_case(n_ch, n_t, seed=0):
    rng = np.random.default_rng(seed)
    return np.ascontiguousarray(rng.standard_normal((n_ch, n_t)) + 1j * rng.standard_normal((n_ch, n_t)))


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not available; only the fallback can be timed")
    rows = []
    for ny, nx, nu in ((2000, 4, 256), (4000, 16, 512), (4000, 32, 2048)):
        case = loglik_case(ny, nx, nu)
        py = best_of(lambda: _kernels_py.mixture_loglik(*case), args.repeat)
        cy = best_of(lambda: _kernels.mixture_loglik(*case), args.repeat) if _kernels else float("nan")
        rows.append((f"mixture_loglik {ny}x{nx}x{nu}", py, cy))
    for n_ch, n_t in ((5, 1024), (101, 4096), (101, 16384)):
        base = rotate_case(n_ch, n_t)
        f1, f2 = base.copy(), base.copy()
        py = best_of(lambda: _kernels_py.xpm_phase_rotate(f1, 1e-3, True), args.repeat)
        cy = best_of(lambda: _kernels.xpm_phase_rotate(f2, 1e-3, True), args.repeat) if _kernels else float("nan")
        rows.append((f"xpm_phase_rotate {n_ch}x{n_t}", py, cy))
    print(f"{'kernel':<34} {'numpy [ms]':>11} {'cython [ms]':>12} {'speedup':>8}")
    for name, py, cy in rows:
        print(f"{name:<34} {1e3 * py:>11.2f} {1e3 * cy:>12.2f} {py / cy:>8.1f}")


if __name__ == "__main__":
    main()
