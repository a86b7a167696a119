"""Time the numba and numpy kernel paths on Example-sized inputs.

    python benchmarks/bench_kernels.py [--repeat 3] [--threads N]

Each kernel is warmed up once per backend (numba compiles on first call), then
timed as the best of ``--repeat`` runs.  Outputs of both paths are compared.
"""
import argparse
import time

import numpy as np

from pwlandscape import kernels


def cases(rng):
    # 1D: Example 1 basis (N = 1253) on a 0..100 grid at h = pi/200
    q1 = rng.uniform(-50, 50, (1253, 1))
    c1 = rng.normal(size=1253) + 1j * rng.normal(size=1253)
    g1 = ((0.0078,), (np.pi / 200,), (6366,))
    phi1 = rng.normal(size=(1253, 25)) + 1j * rng.normal(size=(1253, 25))
    # 2D: Example 2 basis (N = 187) on a 128 x 128 grid
    q2 = rng.uniform(-5, 5, (187, 2))
    c2 = rng.normal(size=187) + 1j * rng.normal(size=187)
    g2 = ((0.08, 0.08), (0.156, 0.156), (128, 128))
    phi2 = rng.normal(size=(187, 10)) + 1j * rng.normal(size=(187, 10))
    field = rng.normal(size=(400, 400)).cumsum(0).cumsum(1)
    return [
        ("fourier_sum 1D", "grid_fourier_sum", (c1, q1) + g1),
        ("fourier_sum 2D", "grid_fourier_sum", (c2, q2) + g2),
        ("density 1D (25 states)", "grid_density", (phi1, np.ones(25), q1) + g1),
        ("density 2D (10 states)", "grid_density", (phi2, np.ones(10), q2) + g2),
        ("prominence 400x400", "basin_prominence", (field,)),
        ("weyl_sums 1e6 x 600", "weyl_sums", (rng.uniform(2, 7, 10**6), np.linspace(0, 30, 600), 0.5)),
    ]


def best_of(fn, args, repeat):
    out = fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if kernels.numba_kernels is None:
        raise SystemExit("numba is not installed; nothing to compare")
    kernels.set_threads(args.threads)
    print(f"{'kernel':<26}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for label, name, a in cases(np.random.default_rng(args.seed)):
        t_np, r_np = best_of(kernels.numpy_kernels[name], a, args.repeat)
        t_nb, r_nb = best_of(kernels.numba_kernels[name], a, args.repeat)
        diff = float(np.max(np.abs(np.asarray(r_np) - np.asarray(r_nb))))
        print(f"{label:<26}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{diff:>14.2e}")


if __name__ == "__main__":
    main()
