"""Timing comparison between the pure-Python kernels and the compiled twin.

Usage: python3 benchmarks/bench_backends.py [--calls 2000] [--repeats 5]
"""
import argparse
import time

import numpy as np

from ratl import _pykern

try:
    from ratl import _cykern
except ImportError:
    _cykern = None


def best_of(fn, repeats):
    return min(timed(fn) for _ in range(repeats))


def timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def make_workloads(calls, rng):
    sici_xs = rng.uniform(0.05, 60.0, size=calls)
    j0_xs = rng.uniform(0.0, 80.0, size=calls)
    h = (rng.standard_normal((16, 2)) + 1j * rng.standard_normal((16, 2))) / np.sqrt(2)
    row_sets = [np.sort(rng.choice(16, size=4, replace=False)).astype(np.intp) for _ in range(calls)]

    def workload(impl):
        return {
            "sici": lambda: [impl.sici(float(x)) for x in sici_xs],
            "j0": lambda: [impl.j0(float(x)) for x in j0_xs],
            "sum_rate_rows": lambda: [
                impl.sum_rate_rows(h, rows, impl.KIND_WF, 100.0, 1.0) for rows in row_sets
            ],
        }

    return workload


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--calls", type=int, default=2000, help="calls per kernel per timing")
    parser.add_argument("--repeats", type=int, default=5, help="timings per kernel (best kept)")
    args = parser.parse_args()

    workload = make_workloads(args.calls, np.random.default_rng(0))
    py = workload(_pykern)
    cy = workload(_cykern) if _cykern is not None else None

    print(f"{args.calls} calls per kernel, best of {args.repeats}")
    header = f"{'kernel':<15}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name in ("sici", "j0", "sum_rate_rows"):
        t_py = best_of(py[name], args.repeats) * 1e3
        if cy is None:
            print(f"{name:<15}{t_py:>14.2f}{'n/a':>14}{'n/a':>10}")
            continue
        t_cy = best_of(cy[name], args.repeats) * 1e3
        print(f"{name:<15}{t_py:>14.2f}{t_cy:>14.2f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
