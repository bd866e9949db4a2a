"""Vector-of-vectors style graph: every vertex owns a separately malloc'd edge array.

Only used as the comparison point for cloning, where its cost is dominated by
one system allocation per vertex.
"""
import time
import weakref

import numpy as np
from numba import njit, prange

from .._native import edge_view, mem_copy, sys_free, sys_malloc
from ..digraph import EDGE_DTYPE, EDGE_SIZE, pack_edge


@njit(cache=True, parallel=True)
def _from_csr(offsets, keys, values, weighted, n, ptrs, degrees):
    for u in prange(n):
        lo = offsets[u]
        d = offsets[u + 1] - lo
        p = sys_malloc(max(d, 1) * EDGE_SIZE)
        e = edge_view(p, max(d, 1))
        for i in range(d):
            w = values[lo + i] if weighted else np.float32(1.0)
            e[i] = pack_edge(keys[lo + i], w)
        ptrs[u] = p
        degrees[u] = d


@njit(cache=True, parallel=True)
def _alloc_like(degrees, ptrs):
    for u in prange(degrees.size):
        ptrs[u] = sys_malloc(max(degrees[u], 1) * EDGE_SIZE)


@njit(cache=True, parallel=True)
def _copy_into(src, degrees, dst):
    for u in prange(degrees.size):
        if degrees[u] > 0:
            mem_copy(dst[u], src[u], degrees[u] * EDGE_SIZE)


@njit(cache=True)
def _free_all(ptrs):
    for u in range(ptrs.size):
        if ptrs[u] != 0:
            sys_free(ptrs[u])
            ptrs[u] = 0


class BaselineGraph:
    """Per-vertex system-allocated edge arrays over vertices ``0..n-1``."""

    def __init__(self, ptrs, degrees):
        self.ptrs = ptrs
        self.degrees = degrees
        weakref.finalize(self, _free_all, ptrs)

    @classmethod
    def from_csr(cls, csr):
        ptrs = np.zeros(csr.n, dtype=np.int64)
        degrees = np.zeros(csr.n, dtype=np.int64)
        weighted = csr.edge_values is not None
        values = csr.edge_values if weighted else np.zeros(0, dtype=np.float32)
        _from_csr(csr.offsets, csr.edge_keys, values, weighted, csr.n, ptrs, degrees)
        return cls(ptrs, degrees)

    @property
    def n(self):
        return self.ptrs.size

    @property
    def m(self):
        return int(self.degrees.sum())

    def edges_of(self, u):
        d = int(self.degrees[u])
        return _copy(self.ptrs[u], d).view(EDGE_DTYPE) if d else np.zeros(0, EDGE_DTYPE)

    def clone(self):
        """Returns ``(copy, alloc_seconds, copy_seconds)``."""
        t0 = time.perf_counter()
        ptrs = np.zeros(self.n, dtype=np.int64)
        degrees = self.degrees.copy()
        _alloc_like(degrees, ptrs)
        t1 = time.perf_counter()
        _copy_into(self.ptrs, degrees, ptrs)
        t2 = time.perf_counter()
        return BaselineGraph(ptrs, degrees), t1 - t0, t2 - t1

    def close(self):
        _free_all(self.ptrs)


@njit(cache=True)
def _copy(addr, d):
    return edge_view(addr, d).copy()
