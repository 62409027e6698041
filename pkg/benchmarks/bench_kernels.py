"""Wall-clock comparison of the compiled kernels and their pure-Python twins.

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

Both backends consume identical random streams, so every pair of timings
below also checks that the outputs agree bit for bit.
"""

import argparse
import time

import numpy as np

from wealthdual import kernels
from wealthdual.measures import Beta, Uniform
from wealthdual.nagent import _schedule, ring


def _rng():
    return np.random.Generator(np.random.PCG64(12345))


def cases(scale):
    n = max(1, int(2000 * scale))
    x0 = np.linspace(0.1, 1.9, n)
    s0 = np.full(n, 2.0)
    unif = Uniform().sampler()
    beta = Beta(2, 2).sampler()
    pi, pj, cum, total = _schedule(ring(10))
    ring0 = np.zeros((n // 4 or 1, 10))
    ring0[:, 0] = 1.0
    return {
        "pair_endpoints (t=20, lambda=0.5)":
            lambda k, g: k.pair_endpoints(x0, s0, 0.5, 0.5, False, 1.0, 20.0, unif, g),
        "nagent_endpoints (ring 10, t=5)":
            lambda k, g: k.nagent_endpoints(ring0, pi, pj, cum, total, 0.5, 5.0, beta, g),
        "em_affine (alpha=2, 500 steps)":
            lambda k, g: k.em_affine(x0 / 2, 2.0, -4.0, 1e-3, 500, True, 1e-9, g),
        "eps_infinity (lambda=0.5, depth 40)":
            lambda k, g: k.eps_infinity(0.5, 0.5, 40, 4 * n, unif, g),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0)
    args = ap.parse_args()
    found = kernels.backends()
    if "compiled" not in found:
        print("compiled extension not built; nothing to compare")
        return
    py, cc = found["python"], found["compiled"]
    print(f"{'kernel':<38} {'python s':>10} {'compiled s':>11} {'speedup':>8}  same")
    for name, fn in cases(args.scale).items():
        times = {}
        outs = {}
        for label, mod in (("python", py), ("compiled", cc)):
            best = float("inf")
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                outs[label] = fn(mod, _rng())
                best = min(best, time.perf_counter() - t0)
            times[label] = best
        a, b = outs["python"], outs["compiled"]
        a = a if isinstance(a, tuple) else (a,)
        b = b if isinstance(b, tuple) else (b,)
        same = all(np.array_equal(u, v) for u, v in zip(a, b))
        print(f"{name:<38} {times['python']:>10.3f} {times['compiled']:>11.4f} "
              f"{times['python'] / times['compiled']:>7.0f}x  {'yes' if same else 'NO'}")


if __name__ == "__main__":
    main()
