"""Timing comparison of the jitted kernels against the pure-Python fallback.

Run:  python3 benchmarks/bench_kernels.py

Both backends live in dxbench._kernels; the jitted variants exist whenever
numba imports, so one process can time the two implementations side by side
on the same inputs.
"""

import random
import statistics
import time

import numpy as np

from dxbench import _kernels
from dxbench._kernels import (
    GOT_NUMBA,
    _indel_distance_impl,
    _indel_distance_k,
    _replicate_means_impl,
    _replicate_means_k,
    encode_text,
)

VOCAB = [
    "acute", "chronic", "community", "acquired", "pneumonia", "heart",
    "failure", "congestive", "renal", "kidney", "injury", "sepsis",
    "urinary", "tract", "infection", "embolism", "pulmonary", "anemia",
]


def _phrase(rng: random.Random) -> str:
    return " ".join(rng.choice(VOCAB) for _ in range(rng.randrange(2, 6)))


def _time(fn, repeats: int = 5) -> float:
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def bench_indel(n_pairs: int = 2000) -> tuple[float, float]:
    rng = random.Random(7)
    pairs = [
        (encode_text(_phrase(rng)), encode_text(_phrase(rng)))
        for _ in range(n_pairs)
    ]
    _indel_distance_k(*pairs[0])  # warm the JIT outside the timed region

    def run(kernel):
        def go():
            acc = 0
            for a, b in pairs:
                acc += kernel(a, b)
            return acc
        return go

    assert run(_indel_distance_impl)() == run(_indel_distance_k)()
    return _time(run(_indel_distance_impl)), _time(run(_indel_distance_k))


def bench_replicate_means(n_replicates: int = 20000, n: int = 26) -> tuple[float, float]:
    rng = np.random.default_rng(42)
    diffs = rng.normal(size=n)
    idx = rng.integers(0, n, size=(n_replicates, n))
    _replicate_means_k(diffs, idx)  # warm

    pure = _time(lambda: _replicate_means_impl(diffs, idx))
    jit = _time(lambda: _replicate_means_k(diffs, idx))
    assert np.array_equal(_replicate_means_impl(diffs, idx), _replicate_means_k(diffs, idx))
    return pure, jit


def main() -> None:
    print(f"numba backend active: {GOT_NUMBA}")
    if not GOT_NUMBA:
        print("(jitted column falls back to the same pure function)")
    rows = [
        ("indel_distance, 2000 phrase pairs", *bench_indel()),
        ("replicate_means, 20000 x 26", *bench_replicate_means()),
    ]
    width = max(len(r[0]) for r in rows)
    print(f"{'workload'.ljust(width)}  {'pure (s)':>10}  {'jitted (s)':>10}  {'speedup':>8}")
    for name, pure, jit in rows:
        speedup = pure / jit if jit > 0 else float("inf")
        print(f"{name.ljust(width)}  {pure:>10.4f}  {jit:>10.4f}  {speedup:>7.1f}x")


if __name__ == "__main__":
    main()
