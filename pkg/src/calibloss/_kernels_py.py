"""Pure-Python twin of ``_kernels.pyx``; same outputs, row for row."""
from functools import lru_cache

import numpy as np

MAXN = 20


def bell_number(n):
    """Number of set partitions of an ``n``-element set (Bell triangle)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def _rgs(n):
    a = [0] * n
    b = [1] * n
    while True:
        yield tuple(a)
        j = n - 1
        while j > 0 and a[j] >= b[j]:
            j -= 1
        if j == 0:
            return
        a[j] += 1
        mx = max(b[j], a[j] + 1)
        for k in range(j + 1, n):
            a[k] = 0
            b[k] = mx


@lru_cache(maxsize=16)
def _labels_cached(n):
    out = np.array(list(_rgs(n)), dtype=np.int32).reshape(-1, n)
    out.setflags(write=False)
    return out


def partition_labels(n):
    """All restricted growth strings of length ``n`` as an int32 array."""
    if n < 1 or n > MAXN:
        raise ValueError(f"n must be in [1, {MAXN}]")
    return _labels_cached(n).copy()


def coarsen_all(p):
    """Block-average ``p`` over every set partition of its index set."""
    p = np.ascontiguousarray(p, dtype=np.float64)
    n = p.shape[0]
    if n < 1 or n > MAXN:
        raise ValueError(f"n must be in [1, {MAXN}]")
    labels = _labels_cached(n)
    out = np.empty(labels.shape, dtype=np.float64)
    for i, row in enumerate(labels):
        sums = [0.0] * n
        sizes = [0] * n
        for k in range(n):
            sums[row[k]] += p[k]
            sizes[row[k]] += 1
        out[i] = [sums[row[k]] / sizes[row[k]] for k in range(n)]
    return out
