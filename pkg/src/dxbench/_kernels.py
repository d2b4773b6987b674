"""Numeric kernels behind the matcher and the bootstrap.

Both kernels are plain loops that numba compiles when available. Set
``DXBENCH_NUMBA=0`` to force the pure-Python fallback; the two paths are
bit-identical (integer DP, and float sums accumulated in the same order).
"""

import os

import numpy as np


def _numba_requested() -> bool:
    flag = os.environ.get("DXBENCH_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off")


def _indel_distance_impl(a, b):
    # Two-row LCS DP; indel distance = len(a) + len(b) - 2 * LCS(a, b).
    n = a.shape[0]
    m = b.shape[0]
    if n == 0:
        return m
    if m == 0:
        return n
    prev = np.zeros(m + 1, dtype=np.int64)
    curr = np.zeros(m + 1, dtype=np.int64)
    for i in range(n):
        ai = a[i]
        for j in range(m):
            if ai == b[j]:
                curr[j + 1] = prev[j] + 1
            elif prev[j + 1] >= curr[j]:
                curr[j + 1] = prev[j + 1]
            else:
                curr[j + 1] = curr[j]
        tmp = prev
        prev = curr
        curr = tmp
    return n + m - 2 * prev[m]


def _replicate_means_impl(diffs, idx):
    # Sequential left-to-right sums keep both backends bit-identical.
    n_rep = idx.shape[0]
    n = idx.shape[1]
    out = np.empty(n_rep, dtype=np.float64)
    for r in range(n_rep):
        acc = 0.0
        for j in range(n):
            acc += diffs[idx[r, j]]
        out[r] = acc / n
    return out


GOT_NUMBA = False
if _numba_requested():
    try:
        from numba import njit

        _indel_distance_k = njit(cache=True)(_indel_distance_impl)
        _replicate_means_k = njit(cache=True)(_replicate_means_impl)
        GOT_NUMBA = True
    except ImportError:
        pass

if not GOT_NUMBA:
    _indel_distance_k = _indel_distance_impl
    _replicate_means_k = _replicate_means_impl


def encode_text(text: str) -> np.ndarray:
    """Encode a string as a uint32 codepoint array for the DP kernel."""
    if not text:
        return np.empty(0, dtype=np.uint32)
    return np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32)


def indel_distance(a: str, b: str) -> int:
    """Minimum insertions + deletions transforming a into b."""
    return int(_indel_distance_k(encode_text(a), encode_text(b)))


def replicate_means(diffs: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Mean of diffs[idx[r]] for each replicate row r."""
    return _replicate_means_k(
        np.ascontiguousarray(diffs, dtype=np.float64),
        np.ascontiguousarray(idx, dtype=np.int64),
    )


def warmup() -> None:
    """Trigger JIT compilation so timed paths do not pay for it."""
    indel_distance("ab", "ac")
    replicate_means(np.zeros(2), np.zeros((2, 2), dtype=np.int64))
