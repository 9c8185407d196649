"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_kernels.py [--nodes 20000] [--repeat 5]

Prints one row per kernel: best-of-N CPU seconds for each backend and the
speedup. Exits without the compiled column if the extension is not built.
"""

import argparse
import time

import numpy as np

from cofree import _pykernels, kernels
from cofree.partition import partition_random
from cofree.synth import PowerLawSpec, gen_power_law


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.process_time()
        fn()
        best = min(best, time.process_time() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=20000)
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--parts", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    g = gen_power_law(PowerLawSpec(args.nodes, 2.5, 2, seed=0))
    rng = np.random.default_rng(0)
    x = rng.standard_normal((g.num_nodes, args.hidden))
    keep = (rng.random(g.num_edges) < 0.5).astype(np.uint8)
    assign = partition_random(g, args.parts, 0).edge_assignment
    keys = rng.integers(0, 2**63, size=g.num_edges, dtype=np.uint64)
    draws = rng.integers(0, args.parts, size=(100_000, 20))

    cases = {
        "neighbor_sum": lambda m: kernels.neighbor_sum(g.indptr, g.indices, g.edge_ids, None, x, impl=m),
        "neighbor_sum_masked": lambda m: kernels.neighbor_sum(g.indptr, g.indices, g.edge_ids, keep, x, impl=m),
        "masked_degree": lambda m: kernels.masked_degree(g.indptr, g.edge_ids, keep, impl=m),
        "replica_counts": lambda m: kernels.replica_counts(g.edges[:, 0], g.edges[:, 1], assign,
                                                           g.num_nodes, args.parts, impl=m),
        "mix64": lambda m: kernels.mix64(keys, 7, impl=m),
        "distinct_per_row": lambda m: kernels.distinct_per_row(draws, args.parts, impl=m),
    }
    compiled = None
    if kernels.BACKEND == "cython":
        from cofree import _ckernels as compiled

    print(f"graph: {g.num_nodes} nodes, {g.num_edges} edges; hidden {args.hidden}; best of {args.repeat}")
    print(f"{'kernel':<22}{'python_s':>12}{'cython_s':>12}{'speedup':>10}")
    for name, fn in cases.items():
        py = best_of(lambda: fn(_pykernels), args.repeat)
        if compiled is None:
            print(f"{name:<22}{py:>12.5f}{'-':>12}{'-':>10}")
            continue
        cy = best_of(lambda: fn(compiled), args.repeat)
        print(f"{name:<22}{py:>12.5f}{cy:>12.5f}{py / max(cy, 1e-9):>9.1f}x")


if __name__ == "__main__":
    main()
