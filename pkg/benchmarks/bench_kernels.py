"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times each kernel (best of N after one warm-up call, so jit compilation is
excluded) and checks both backends return the same result.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from edgequery import _accel, kernels, vision


def workloads(rng: np.random.Generator):
    mask = ((rng.random((480, 640)) < 0.02) * 255).astype(np.uint8)
    frames = [vision.Frame(rng.integers(0, 256, (480, 640, 3), dtype=np.uint8)) for _ in range(3)]
    x = 2.0 + rng.lognormal(0.0, 0.5, 10_000)
    grid = np.linspace(0.0, x.min() * (1 - 1e-6), 256)
    ids = np.arange(1_000_000)
    return {
        "rank_filter (640x480, r=2)": lambda: kernels.rank_filter(mask, 2, True),
        "component_boxes (640x480)": lambda: kernels.component_boxes(kernels.rank_filter(mask, 1, True)),
        "gamma_score (n=10k, 256 pts)": lambda: kernels.gamma_score(x, grid),
        "keyed_uniform (1M ids)": lambda: kernels.keyed_uniform(1, ids, 1),
        "detect (640x480 RGB)": lambda: vision.detect(*frames),
    }


def same(a, b) -> bool:
    if isinstance(a, list):
        return a == b
    return np.allclose(a, b, rtol=1e-9, atol=1e-12) and a.shape == b.shape


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _accel.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    jobs = workloads(np.random.default_rng(0))
    print(f"{'kernel':<32}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}  agree")
    for name, fn in jobs.items():
        times, results = {}, {}
        for backend in ("numba", "numpy"):
            with _accel.backend(backend):
                results[backend] = fn()
                times[backend] = min(timeit.repeat(fn, number=1, repeat=args.repeat)) * 1e3
        agree = same(results["numba"], results["numpy"])
        print(f"{name:<32}{times['numba']:>10.2f}{times['numpy']:>10.2f}{times['numpy'] / times['numba']:>8.1f}x  {agree}")


if __name__ == "__main__":
    main()
