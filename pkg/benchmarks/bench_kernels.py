"""Compare the compiled kernels with the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Times ``bilinear_sample`` on a texture lookup the size of one onboard BEV
raster and ``dijkstra_grid`` on square cost maps, checks both backends
return the same results, and prints a table of best-of-N wall times.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from aerialterrain import _kernels_py

try:
    from aerialterrain import _ckernels
except ImportError:
    _ckernels = None


def bilinear_case(n_points, seed=0):
    r = np.random.default_rng(seed)
    img = r.random((1024, 1024)) * 255
    rows = r.uniform(-1, 1024, n_points)
    cols = r.uniform(-1, 1024, n_points)
    return (img, rows, cols)


def dijkstra_case(side, seed=0):
    r = np.random.default_rng(seed)
    cost = r.random((side, side))
    ok = (r.random((side, side)) > 0.1).astype(np.uint8)
    ok[0, 0] = ok[-1, -1] = 1
    return (cost, ok, 0, side * side - 1, 8, True)


def best_time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def check_same(name, a, b):
    if name == "bilinear_sample":
        same = np.array_equal(a[1], b[1]) and np.allclose(a[0], b[0], rtol=0, atol=1e-9)
    else:
        same = a[0] == b[0] and abs(a[1] - b[1]) <= 1e-9 * max(1.0, abs(a[1]))
    if not same:
        raise SystemExit(f"{name}: backends disagree")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json", help="also write results to this file")
    args = p.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first", file=sys.stderr)
        return 1
    cases = [("bilinear_sample", f"{n:,} points", bilinear_case(n)) for n in (10_000, 1_000_000)]
    cases += [("dijkstra_grid", f"{s}x{s} grid", dijkstra_case(s)) for s in (50, 200)]
    results = []
    for name, label, case in cases:
        py_fn, c_fn = getattr(_kernels_py, name), getattr(_ckernels, name)
        check_same(name, py_fn(*case), c_fn(*case))
        t_py = best_time(py_fn, case, args.repeat)
        t_c = best_time(c_fn, case, args.repeat)
        results.append({"kernel": name, "case": label, "python_s": t_py, "cython_s": t_c, "speedup": t_py / t_c})
    print(f"{'kernel':<16} {'case':<16} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8}")
    for r in results:
        print(f"{r['kernel']:<16} {r['case']:<16} {1e3 * r['python_s']:>12.2f} {1e3 * r['cython_s']:>12.2f} "
              f"{r['speedup']:>7.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
