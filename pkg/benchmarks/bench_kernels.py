#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the implicit conservative step and the discrete energy reduction on
wave-like data across grid sizes.  Both backends are imported directly,
so no NLWAVE_BACKEND juggling is needed.

    python benchmarks/bench_kernels.py [--sizes 2001,8001,32001] [--steps 50]
"""

import argparse
import time

import numpy as np

from nlwave.kernels import numba_backend, numpy_backend


def make_levels(n, dx, dt):
    xs = dx * (np.arange(n) - n // 2)
    u0 = np.zeros(n)
    u0[2:-2] = 1.5 * np.exp(-xs[2:-2] ** 2) * np.cos(3.0 * xs[2:-2])
    u1 = np.zeros(n)
    u1[1:-1] = u0[1:-1] + dt * 0.3 * np.exp(-xs[1:-1] ** 2)
    return u0, u1


def time_step(backend, u0, u1, dt, dx, steps):
    # advance a real wave so the work matches production use
    a, b = u0.copy(), u1.copy()
    backend.nonlinear_step(a, b, dt, dx, 3.0, 1e-13, 60)   # warm JIT
    t0 = time.perf_counter()
    for _ in range(steps):
        c, _ = backend.nonlinear_step(a, b, dt, dx, 3.0, 1e-13, 60)
        a, b = b, c
    return (time.perf_counter() - t0) / steps


def time_energy(backend, u0, u1, dt, dx, reps):
    backend.discrete_energy(u0, u1, dt, dx, 3.0, True)
    t0 = time.perf_counter()
    for _ in range(reps):
        backend.discrete_energy(u0, u1, dt, dx, 3.0, True)
    return (time.perf_counter() - t0) / reps


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="2001,8001,32001")
    parser.add_argument("--steps", type=int, default=50)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    print(f"{'n_points':>10} {'kernel':>8} {'numpy ms':>10} {'numba ms':>10} "
          f"{'speedup':>8}")
    for n in sizes:
        dx = 40.0 / (n - 1)
        dt = 0.5 * dx
        u0, u1 = make_levels(n, dx, dt)
        t_np = time_step(numpy_backend, u0, u1, dt, dx, args.steps)
        t_nb = time_step(numba_backend, u0, u1, dt, dx, args.steps)
        print(f"{n:>10} {'step':>8} {t_np * 1e3:>10.3f} {t_nb * 1e3:>10.3f} "
              f"{t_np / t_nb:>8.1f}x")
        e_np = time_energy(numpy_backend, u0, u1, dt, dx, 200)
        e_nb = time_energy(numba_backend, u0, u1, dt, dx, 200)
        print(f"{n:>10} {'energy':>8} {e_np * 1e3:>10.3f} {e_nb * 1e3:>10.3f} "
              f"{e_np / e_nb:>8.1f}x")

    # the two backends agree to roundoff on the same input
    n = sizes[0]
    dx = 40.0 / (n - 1)
    dt = 0.5 * dx
    u0, u1 = make_levels(n, dx, dt)
    a, _ = numpy_backend.nonlinear_step(u0, u1, dt, dx, 3.0, 1e-13, 60)
    b, _ = numba_backend.nonlinear_step(u0, u1, dt, dx, 3.0, 1e-13, 60)
    print(f"\nbackend max |diff| on one step: {np.max(np.abs(a - b)):.2e}")


if __name__ == "__main__":
    main()
