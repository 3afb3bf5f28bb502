"""Benchmark the hot filter kernels across backends.

Usage: python benchmarks/bench_filters.py [--size 224] [--repeats 5]
"""

import argparse
import time

import numpy as np

from suppresskit import _fast
from suppresskit._fast import _filters_np


def time_call(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=224)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    img = rng.random((args.size, args.size, 3))

    cases = {
        "bilateral d=11": lambda mod: mod.bilateral(img, 11, 170.0, 75.0),
        "median k=11": lambda mod: mod.median_filter(img, 11),
    }
    backends = {name: _fast.get_backend(name) for name in _fast.available_backends()}

    print(f"image {args.size}x{args.size}x3, best of {args.repeats} runs")
    print(f"active backend at import: {_fast.BACKEND}")
    header = f"{'kernel':<16}" + "".join(f"{name:>12}" for name in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}"
    print(header)
    for label, call in cases.items():
        times = {name: time_call(lambda m=mod: call(m), args.repeats)
                 for name, mod in backends.items()}
        row = f"{label:<16}" + "".join(f"{times[name] * 1e3:>10.1f}ms" for name in backends)
        if "cython" in times and "numpy" in times:
            row += f"{times['numpy'] / times['cython']:>9.1f}x"
        print(row)

    shared = time_call(lambda: _filters_np.nlmeans(img, 20.0, 11, 11), args.repeats)
    print(f"{'nlmeans h=20':<16}{shared * 1e3:>10.1f}ms  (shared vectorized path)")


if __name__ == "__main__":
    main()
