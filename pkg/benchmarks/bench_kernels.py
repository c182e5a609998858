"""Time the compiled and pure-Python angular kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fracfilm import _kernels_py

try:
    from fracfilm import _kernels
except ImportError:
    _kernels = None

CASES = [
    (0.3, 0.5, 0.25),
    (0.6, 0.1, 0.5),
    (0.8, 0.02, 0.75),
]


def best_time(fn, args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--points", type=int, default=2000)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the Python kernel is available")
    print(f"{'r0':>5} {'delta':>6} {'s':>5} {'python ms':>10} {'cython ms':>10} {'speedup':>8} {'max diff':>9}")
    for r0, delta, s in CASES:
        rho = np.linspace(1e-3, 3.0, args.points)
        inputs = (r0, rho, delta, s)
        t_py = best_time(_kernels_py.angular_kernel, inputs, args.repeat)
        if _kernels is None:
            print(f"{r0:5.2f} {delta:6.3f} {s:5.2f} {1e3 * t_py:10.2f}")
            continue
        t_cy = best_time(_kernels.angular_kernel, inputs, args.repeat)
        diff = float(np.max(np.abs(_kernels_py.angular_kernel(*inputs) - _kernels.angular_kernel(*inputs))))
        print(
            f"{r0:5.2f} {delta:6.3f} {s:5.2f} {1e3 * t_py:10.2f} {1e3 * t_cy:10.2f} "
            f"{t_py / t_cy:8.1f} {diff:9.1e}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
