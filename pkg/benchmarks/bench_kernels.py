"""Time the compiled kernels against their numpy twins.

Usage: ``python benchmarks/bench_kernels.py [--repeat N] [--size S]``
"""

import argparse
import timeit

import numpy as np

from srdistill import _backend
from srdistill.patching import grid_stats
from srdistill.resample import bicubic_resize


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=512)
    args = ap.parse_args(argv)

    backends = ["python"]
    try:
        _backend.kernels("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled kernels not built; timing the numpy fallback only")

    img = np.random.default_rng(0).random((args.size, args.size, 3)).astype(np.float32)
    n = args.size
    cases = {
        f"bicubic {n}->{n // 4}": lambda b: bicubic_resize(img, n // 4, n // 4, backend=b),
        f"bicubic {n}->{2 * n}": lambda b: bicubic_resize(img, 2 * n, 2 * n, backend=b),
        f"patch stats s=64 on {n}^2": lambda b: grid_stats(img, 64, backend=b),
        f"patch stats s=8 on {n}^2": lambda b: grid_stats(img, 8, backend=b),
    }
    print(f"{'kernel':32s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in cases.items():
        times = [_best(lambda b=b: fn(b), args.repeat) for b in backends]
        row = f"{name:32s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[1] / times[0]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
