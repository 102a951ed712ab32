# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled set-partition kernels.

Partitions of ``{0..n-1}`` are walked as restricted growth strings in
lexicographic order: ``a[0] = 0`` and ``a[j] <= 1 + max(a[:j])``.  Row 0 is
the single-block partition and the last row is all singletons.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF MAXN = 20


def bell_number(int n):
    """Number of set partitions of an ``n``-element set (Bell triangle)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    # plain Python ints: the values overflow C types quickly
    row = [1]
    for _ in range(n):
        nxt = [row[len(row) - 1]]
        for v in row:
            nxt.append(nxt[len(nxt) - 1] + v)
        row = nxt
    return row[0]


def partition_labels(int n):
    """All restricted growth strings of length ``n`` as an int32 array."""
    if n < 1 or n > MAXN:
        raise ValueError(f"n must be in [1, {MAXN}]")
    cdef Py_ssize_t count = bell_number(n)
    out = np.empty((count, n), dtype=np.int32)
    cdef int[:, ::1] lab = out
    cdef int a[MAXN]
    cdef int b[MAXN]
    cdef int j, k, mx
    cdef Py_ssize_t row = 0
    for j in range(n):
        a[j] = 0
        b[j] = 1
    while True:
        for k in range(n):
            lab[row, k] = a[k]
        row += 1
        j = n - 1
        while j > 0 and a[j] >= b[j]:
            j -= 1
        if j == 0:
            break
        a[j] += 1
        mx = b[j] if b[j] > a[j] + 1 else a[j] + 1
        for k in range(j + 1, n):
            a[k] = 0
            b[k] = mx
    return out


def coarsen_all(const double[::1] p):
    """Block-average ``p`` over every set partition of its index set.

    Returns a ``(Bell(n), n)`` float64 array whose rows follow the order of
    :func:`partition_labels`.
    """
    cdef int n = p.shape[0]
    if n < 1 or n > MAXN:
        raise ValueError(f"n must be in [1, {MAXN}]")
    cdef Py_ssize_t count = bell_number(n)
    out = np.empty((count, n), dtype=np.float64)
    cdef double[:, ::1] q = out
    cdef int a[MAXN]
    cdef int b[MAXN]
    cdef double sums[MAXN]
    cdef int sizes[MAXN]
    cdef int j, k, mx, blocks
    cdef Py_ssize_t row = 0
    for j in range(n):
        a[j] = 0
        b[j] = 1
    while True:
        blocks = b[n - 1] if b[n - 1] > a[n - 1] + 1 else a[n - 1] + 1
        for k in range(blocks):
            sums[k] = 0.0
            sizes[k] = 0
        for k in range(n):
            sums[a[k]] += p[k]
            sizes[a[k]] += 1
        for k in range(n):
            q[row, k] = sums[a[k]] / sizes[a[k]]
        row += 1
        j = n - 1
        while j > 0 and a[j] >= b[j]:
            j -= 1
        if j == 0:
            break
        a[j] += 1
        mx = b[j] if b[j] > a[j] + 1 else a[j] + 1
        for k in range(j + 1, n):
            a[k] = 0
            b[k] = mx
    return out
