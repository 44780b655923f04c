"""Time the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-N wall time of each backend and
the speed-up. Needs the extension built (``pip install -e .``).
"""

import argparse
import timeit

import numpy as np

from fexkit._kernels import _fallback
from fexkit.geometry import convex_hull


def cases(rng):
    img = rng.random((112, 112))
    big = rng.random((480, 640))
    poly = np.ascontiguousarray(convex_hull(rng.uniform(0, 112, (30, 2))), dtype=np.float64)
    X = rng.integers(0, 50, (2000, 40)).astype(np.float64)
    y = rng.integers(0, 3, 2000).astype(np.int64)
    cand = np.arange(0, 40, 3, dtype=np.int64)
    return {
        "cell_histograms 112x112": ("cell_histograms", (img, 8, 8, False)),
        "rasterize_convex 112x112": ("rasterize_convex", (poly, 112, 112)),
        "warp_similarity 640x480 -> 112": ("warp_similarity", (big, 2.1, 0.3, 250.0, 180.0, 112, 112)),
        "best_split 2000x14": ("best_split", (X, y, 3, cand, 1)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    try:
        from fexkit._kernels import _core
    except ImportError:
        raise SystemExit("compiled extension not available; build with pip install -e .")
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'cython ms':>10s} {'python ms':>10s} {'speed-up':>9s}")
    for label, (name, argv) in cases(rng).items():
        times = []
        for mod in (_core, _fallback):
            fn = getattr(mod, name)
            number = 3
            t = min(timeit.repeat(lambda: fn(*argv), number=number, repeat=args.repeat)) / number
            times.append(t * 1e3)
        print(f"{label:34s} {times[0]:10.3f} {times[1]:10.3f} {times[1] / times[0]:8.1f}x")


if __name__ == "__main__":
    main()
