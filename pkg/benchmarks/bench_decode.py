#!/usr/bin/env python3
"""Benchmark the greedy-decode kernel: compiled extension vs pure Python.

Runs the same three workloads through both backends and prints a small
table.  Usage: python benchmarks/bench_decode.py [--n 100000]
"""

import argparse
import time

import numpy as np

from stlclab import _pydecode
from stlclab.core import TypingContext
from stlclab.grammar import (
    KERNEL_BACKEND,
    build_rule_table,
    encode_type_rules,
    enumerate_types,
)

try:
    from stlclab import _speedups
except ImportError:
    _speedups = None


def workloads(table, n):
    rng = np.random.default_rng(0)
    random_ids = [
        np.ascontiguousarray(
            rng.integers(0, table.n_ids, size=int(rng.integers(0, 33))), dtype=np.intc
        )
        for _ in range(n)
    ]
    valid = [
        np.ascontiguousarray(encode_type_rules(ty, table), dtype=np.intc)
        for ty in enumerate_types(5)
    ] * max(1, n // 2000)
    deep = [
        np.ascontiguousarray(encode_type_rules(ty, table), dtype=np.intc)
        for ty in enumerate_types(6)[-200:]
    ] * max(1, n // 20_000)
    return [("random ids", random_ids), ("valid shallow", valid), ("valid deep", deep)]


def bench(kernel, args_tail, batches):
    out = {}
    for name, batch in batches:
        t0 = time.perf_counter()
        for ids in batch:
            kernel(ids, *args_tail)
        elapsed = time.perf_counter() - t0
        out[name] = (elapsed, len(batch) / elapsed)
    return out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=100_000)
    args = parser.parse_args()

    table = build_rule_table(TypingContext.global_context())
    batches = workloads(table, args.n)
    kernel_args = table.kernel_args()

    backends = [("python", _pydecode.consume_rules)]
    if _speedups is not None:
        backends.append(("compiled", _speedups.consume_rules))
    print(f"active backend at import: {KERNEL_BACKEND}\n")
    results = {name: bench(fn, kernel_args, batches) for name, fn in backends}

    header = f"{'workload':>16} | " + " | ".join(f"{n:>22}" for n in results)
    print(header)
    print("-" * len(header))
    for wname, _ in batches:
        row = [f"{wname:>16}"]
        for bname in results:
            secs, rate = results[bname][wname]
            row.append(f"{secs:7.3f}s {rate:10.0f}/s")
        print(" | ".join(row))
    if "compiled" in results:
        speedups = [
            results["python"][w][0] / results["compiled"][w][0] for w, _ in batches
        ]
        print(f"\ncompiled speedup: {min(speedups):.1f}x - {max(speedups):.1f}x")


if __name__ == "__main__":
    main()
