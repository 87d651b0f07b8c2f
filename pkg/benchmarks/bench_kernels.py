"""Time the numba and numpy kernel backends on casebase-sized inputs.

    python benchmarks/bench_kernels.py --cases 1000 --repeat 5

Each backend runs the same inputs; outputs are checked for equality before
timings are reported. The first numba call is excluded (JIT warm-up).
"""
import argparse
import time

import numpy as np

from casearg import _kernels
from casearg.af import _csr


def make_inputs(n_cases: int, n_features: int, seed: int):
    rng = np.random.default_rng(seed)
    counts = rng.integers(0, 3, size=(n_cases + 1, n_features)).astype(np.int64)
    counts[0] = 0
    outcomes = rng.integers(0, 2, size=n_cases + 1).astype(np.int64)
    outcomes[0] = 0
    x = rng.integers(0, 3, size=n_features).astype(np.int64)
    points = rng.random((n_cases, n_features))
    centroids = points[rng.choice(n_cases, size=min(300, n_cases), replace=False)]
    return counts, outcomes, x, points, centroids


def run_all(inputs):
    counts, outcomes, x, points, centroids = inputs
    out = {}
    t = {}
    start = time.perf_counter()
    dom = _kernels.dominance(counts)
    t["dominance"] = time.perf_counter() - start
    start = time.perf_counter()
    attacks = _kernels.minimal_pairs(dom, outcomes, False)
    t["minimal_pairs"] = time.perf_counter() - start
    start = time.perf_counter()
    irr = _kernels.irrelevant(counts, x)
    t["irrelevant"] = time.perf_counter() - start
    n = len(counts) + 1
    edges = np.argwhere(attacks)
    edges = np.vstack([edges, np.column_stack([np.full(irr.sum(), n - 1), np.flatnonzero(irr)])])
    indptr, indices, indeg = _csr(n, edges)
    start = time.perf_counter()
    labels = _kernels.grounded_labels(n, indptr, indices, indeg)
    t["grounded_labels"] = time.perf_counter() - start
    start = time.perf_counter()
    assign = _kernels.assign_nearest(points, centroids)
    t["assign_nearest"] = time.perf_counter() - start
    out.update(dom=dom, attacks=attacks, irr=irr, labels=labels[0], assign=assign[0])
    return out, t


def main(argv=None):
    p = argparse.ArgumentParser(description="numba vs numpy kernel timings")
    p.add_argument("--cases", type=int, default=1000)
    p.add_argument("--features", type=int, default=12)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    inputs = make_inputs(args.cases, args.features, args.seed)
    backends = _kernels.available_backends()
    results, timings = {}, {}
    for name in backends:
        with _kernels.use_backend(name):
            if name == "numba":
                run_all(inputs)  # compile
            runs = [run_all(inputs) for _ in range(args.repeat)]
        results[name] = runs[0][0]
        timings[name] = {k: min(r[1][k] for r in runs) for k in runs[0][1]}
    if len(backends) > 1:
        ref = results[backends[0]]
        for name in backends[1:]:
            for key, value in results[name].items():
                if not np.array_equal(value, ref[key]):
                    raise SystemExit(f"backend {name} disagrees with {backends[0]} on {key}")
    print(f"{args.cases} cases, {args.features} features, best of {args.repeat} (ms)")
    print("kernel".ljust(18) + "".join(b.rjust(12) for b in backends))
    for key in timings[backends[0]]:
        print(key.ljust(18) + "".join(f"{timings[b][key] * 1e3:12.2f}" for b in backends))


if __name__ == "__main__":
    main()
