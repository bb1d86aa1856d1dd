"""Compare the compiled and pure-NumPy Jacobi sweep kernels.

Usage: python benchmarks/bench_svd.py [--repeat N]
"""

import argparse
import time

import numpy as np

from lowrank_shield import _jacobi_py
from lowrank_shield.linalg import ROTATION_TOL, MAX_SWEEPS, round_robin_schedule

try:
    from lowrank_shield import _jacobi
except ImportError:  # extension not built
    _jacobi = None

SHAPES = [(32, 96), (160, 96), (300, 90), (1600, 96)]


def run(kernel, a):
    y = np.array(a.T, order="C", copy=True)
    v = np.eye(a.shape[1])
    floor = (np.finfo(float).eps * np.linalg.norm(a)) ** 2
    start = time.perf_counter()
    kernel(y, v, round_robin_schedule(a.shape[1]), ROTATION_TOL, floor, MAX_SWEEPS)
    return time.perf_counter() - start


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    kernels = [("python", _jacobi_py.jacobi_sweeps)]
    if _jacobi is not None:
        kernels.insert(0, ("cython", _jacobi.jacobi_sweeps))
    else:
        print("compiled extension unavailable; timing the fallback only")
    print(f"{'shape':>12} " + " ".join(f"{name:>10}" for name, _ in kernels) + "   speedup")
    for shape in SHAPES:
        a = rng.standard_normal(shape)
        times = [min(run(k, a) for _ in range(args.repeat)) for _, k in kernels]
        speed = f"{times[-1] / times[0]:8.1f}x" if len(times) == 2 else ""
        print(f"{shape[0]:>5}x{shape[1]:<6} " + " ".join(f"{t:10.4f}" for t in times) + f"  {speed}")


if __name__ == "__main__":
    main()
