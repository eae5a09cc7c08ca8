"""Timing comparison of the compiled kernels against the pure-numpy fallback.

Run twice, once per backend:

    python benchmarks/benchmark_kernels.py
    ADAPTIVE_LAB_NO_NUMBA=1 python benchmarks/benchmark_kernels.py

The kernel backend is chosen at import time from ADAPTIVE_LAB_NO_NUMBA, so
the two backends cannot be timed in a single process.
"""

import time

import numpy as np

from adaptive_lab import _kernels
from adaptive_lab.env import Environment, generate_trajectory
from adaptive_lab.features import unit_sphere_arms
from adaptive_lab.linalg import sym_eigendecomposition
from adaptive_lab.policies import LinUCBPolicy


def _time(label, fn, repeats=5):
    fn()  # warm-up (includes JIT compilation on the numba backend)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    print(f"  {label:<40s} best {min(times) * 1e3:9.2f} ms  "
          f"median {sorted(times)[len(times) // 2] * 1e3:9.2f} ms")


def main():
    backend = "numba" if _kernels.USING_NUMBA else "numpy fallback"
    print(f"backend: {backend}")

    rng = np.random.default_rng(7)

    print("linucb trajectory simulation:")
    for T, d in ((2000, 4), (8000, 4), (8000, 16)):
        env = Environment(feature_map=unit_sphere_arms(d, 8),
                          beta0=np.eye(d)[0], sigma=0.5)
        policy = LinUCBPolicy(gamma=2.0)
        _time(f"T={T}, d={d}, K=8",
              lambda e=env, p=policy, t=T: generate_trajectory(e, p, t, 123))

    print("jacobi eigendecomposition:")
    for d in (8, 32, 128):
        a = rng.standard_normal((d, d))
        s = a @ a.T
        _time(f"d={d}", lambda m=s: sym_eigendecomposition(m))


if __name__ == "__main__":
    main()
