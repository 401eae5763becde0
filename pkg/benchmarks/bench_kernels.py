"""Time the compiled and pure-Python kernel backends on representative sizes.

    python benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Each kernel is run on both backends with identical inputs; outputs are
checked for agreement before timings are reported.
"""
from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from dockeval import kernels


def workloads(rng):
    lig = rng.uniform(0, 12, size=(40, 3))
    prot = rng.uniform(-10, 22, size=(3000, 3))
    n = 600
    x = rng.uniform(0, 4, size=(n, 3))
    pi = rng.integers(0, n, 4000).astype(np.int64)
    pj = ((pi + 1 + rng.integers(0, n - 1, 4000)) % n).astype(np.int64)
    r0 = rng.uniform(0.1, 0.4, 4000)
    k = rng.uniform(1e2, 1e4, 4000)
    ax = np.arange(-2.0, 14.0, 0.25)
    seq_a = rng.integers(65, 85, 400).astype(np.int64)
    seq_b = rng.integers(65, 85, 380).astype(np.int64)
    return {
        "min_distance_brute (40 x 3000)": lambda b: b.min_distance_brute(lig, prot),
        "pairs_within (40 x 3000, 6 Å)": lambda b: b.pairs_within(lig, prot, 6.0),
        "pair_terms (4000 repulsive pairs)": lambda b: b.pair_terms(x, pi, pj, r0, k, True),
        "rasterize (64^3 grid, 40 spheres)": lambda b: b.rasterize(ax, ax, ax, lig, np.full(40, 1.36)),
        "nw_matrix (400 x 380)": lambda b: b.nw_matrix(seq_a, seq_b, 1, -1, -2),
    }


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.allclose(a, b, rtol=1e-12, atol=1e-12)
    return a == b or np.isclose(a, b, rtol=1e-12)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    if "cython" not in kernels.BACKENDS:
        print("compiled backend not built; run `pip install -e . --no-build-isolation` first", file=sys.stderr)
        return 1
    backends = {name: kernels.get_backend(name) for name in ("cython", "python")}
    rows = []
    print(f"{'kernel':38s} {'cython ms':>10s} {'python ms':>10s} {'speedup':>8s}")
    for name, fn in workloads(np.random.default_rng(0)).items():
        if not _same(fn(backends["cython"]), fn(backends["python"])):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 1
        t = {b: min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) * 1e3
             for b, mod in backends.items()}
        rows.append({"kernel": name, "cython_ms": t["cython"], "python_ms": t["python"],
                     "speedup": t["python"] / t["cython"]})
        print(f"{name:38s} {t['cython']:10.3f} {t['python']:10.3f} {t['python'] / t['cython']:7.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
