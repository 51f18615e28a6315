"""Compare the compiled and pure-Python kernels.

Run from the repository root after building the extension::

    python benchmarks/bench_kernels.py [--repeat 5]

Each row reports the best wall time over the repeats for both backends and
the speed-up of the compiled one.  The scalar root finding behind the
inverse variation and the diagonal worst case dominates the solvers, so
those are the kernels timed here.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from possets import _kernels_py

try:
    from possets import _kernels as compiled
except ImportError:  # pragma: no cover - depends on the build
    compiled = None


def _cases(rng: np.random.Generator):
    t = rng.uniform(1e-3, 50.0, 100_000)
    y = rng.uniform(0.0, 20.0, 20_000)
    diag = []
    for _ in range(200):
        m = int(rng.integers(2, 9))
        diag.append((rng.choice([-1.0, 1.0], m) * rng.uniform(0.1, 3.0, m), rng.uniform(0.5, 3.0, m),
                     float(rng.uniform(0.01, 5.0))))
    return {
        "variation (1e5 points)": lambda k: k.variation(t),
        "inv_lower (2e4 points)": lambda k: k.inv_lower(y),
        "inv_upper (2e4 points)": lambda k: k.inv_upper(y),
        **{f"diag_worst_case norm={n} (200 sets)": (lambda k, n=n: [k.diag_worst_case(c, d, tau, n) for c, d, tau in diag])
           for n in (0, 1, 2)},
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':40s} {'python [s]':>12s} {'compiled [s]':>13s} {'speed-up':>9s}")
    for name, fn in cases.items():
        tp = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
        if compiled is None:
            print(f"{name:40s} {tp:12.4f} {'n/a':>13s} {'n/a':>9s}")
            continue
        tc = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat))
        print(f"{name:40s} {tp:12.4f} {tc:13.4f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
