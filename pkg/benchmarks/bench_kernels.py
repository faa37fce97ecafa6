"""Time the split-search kernel and a full boosted-tree fit on both backends.

    python benchmarks/bench_kernels.py --rows 20000 --features 8 --repeat 5
"""

import argparse
import time

import numpy as np

from fairkit import _fallback, _kernels
from fairkit.models import train_gbt
from fairkit.models.gbt import GbtConfig


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_inputs(rng, n, p, nodes):
    X = rng.normal(size=(n, p))
    order = np.ascontiguousarray(np.stack([np.argsort(X[:, j], kind="stable") for j in range(p)]),
                                 dtype=np.int64)
    g = rng.normal(size=n)
    h = rng.uniform(0.05, 0.25, n)
    node_of = rng.integers(0, nodes, n).astype(np.int64)
    G = np.bincount(node_of, weights=g, minlength=nodes)
    H = np.bincount(node_of, weights=h, minlength=nodes)
    return X, order, g, h, node_of, G, H


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--features", type=int, default=8)
    ap.add_argument("--nodes", type=int, default=4)
    ap.add_argument("--rounds", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _kernels.BACKEND != "compiled":
        print("compiled extension not available; only the numpy backend will be timed")
    rng = np.random.default_rng(args.seed)
    inputs = kernel_inputs(rng, args.rows, args.features, args.nodes)
    backends = {"python": _fallback.find_best_splits}
    if _kernels.BACKEND == "compiled":
        from fairkit import _core
        backends["compiled"] = _core.find_best_splits

    print(f"find_best_splits  n={args.rows} p={args.features} nodes={args.nodes}")
    results = {}
    for name, fn in backends.items():
        results[name] = fn(*inputs, 1.0, 1.0)
        t = best_of(lambda: fn(*inputs, 1.0, 1.0), args.repeat)
        print(f"  {name:9s} {t * 1e3:10.2f} ms")
    if len(results) == 2:
        same = all(np.array_equal(a, b) for a, b in zip(results["python"], results["compiled"]))
        print(f"  outputs bit-identical: {same}")

    X = inputs[0]
    y = (rng.random(args.rows) < 1 / (1 + np.exp(-X[:, 0]))).astype(float)
    cfg = GbtConfig(rounds=args.rounds, max_depth=4)
    print(f"train_gbt  n={args.rows} p={args.features} rounds={args.rounds} depth=4")
    saved = _kernels.find_best_splits
    try:
        for name, fn in backends.items():
            _kernels.find_best_splits = fn
            t = best_of(lambda: train_gbt(X, y, cfg=cfg), max(1, args.repeat // 2))
            print(f"  {name:9s} {t:10.3f} s")
    finally:
        _kernels.find_best_splits = saved


if __name__ == "__main__":
    main()
