"""Time the compiled kernels against their pure-Python versions.

    python3 benchmarks/bench_kernels.py [--events N] [--states S]
"""
import argparse
import time

import numpy as np

from eventcast import kernels


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def random_chain(rng, n, t):
    indptr = np.arange(0, (n + 1) * t, t, dtype=np.int64)
    indices = rng.integers(0, n, size=n * t).astype(np.int32)
    probs = rng.dirichlet(np.ones(t), size=n).reshape(-1)
    final = np.zeros(n, dtype=np.uint8)
    final[rng.choice(n, size=max(1, n // 20), replace=False)] = 1
    return indptr, indices, probs, final


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=200_000)
    ap.add_argument("--states", type=int, default=2_000)
    ap.add_argument("--symbols", type=int, default=4)
    ap.add_argument("--partitions", type=int, default=100)
    ap.add_argument("--horizon", type=int, default=100)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    impls = kernels.implementations()
    table = rng.integers(0, args.states, size=(args.states, args.symbols)).astype(np.int32)
    symbols = rng.integers(0, args.symbols, size=args.events).astype(np.int32)
    parts = rng.integers(0, args.partitions, size=args.events).astype(np.int32)
    chain = random_chain(rng, args.states, args.symbols)

    print(f"backend selected at import: {kernels.BACKEND}")
    print(f"{'kernel':<16}{'impl':<8}{'seconds':>12}{'rate':>16}")
    results = {}
    for name, mod in impls.items():
        def run():
            cur = np.zeros(args.partitions, dtype=np.int32)
            return kernels.run_partitioned(table, symbols, parts, cur, impl=mod)

        t = best_of(run, args.repeats)
        results[("run_partitioned", name)] = (t, run())
        print(f"{'run_partitioned':<16}{name:<8}{t:>12.4f}{args.events / t:>13.0f} ev/s")

        def hit():
            return [kernels.first_hit(*chain, s, args.horizon, 0.0, impl=mod) for s in range(0, args.states, 100)]

        t = best_of(hit, args.repeats)
        results[("first_hit", name)] = (t, hit())
        n_starts = len(range(0, args.states, 100))
        print(f"{'first_hit':<16}{name:<8}{t:>12.4f}{n_starts / t:>13.1f} dist/s")

    if "cython" in impls:
        for kernel in ("run_partitioned", "first_hit"):
            (tc, rc), (tp, rp) = results[(kernel, "cython")], results[(kernel, "python")]
            same = np.array_equal(np.asarray(rc), np.asarray(rp))
            print(f"{kernel}: speed-up {tp / tc:.1f}x, identical output: {same}")


if __name__ == "__main__":
    main()
