"""k-step reverse walk: per-vertex counts of walks along out-edges."""
import numpy as np
from numba import njit, prange

from ._native import edge_view
from .digraph import DiGraph, edge_target


@njit(cache=True, parallel=True)
def _step_digraph(edges, degrees, cap, src, dst):
    for u in prange(cap):
        d = degrees[u]
        acc = np.uint64(0)
        if d > 0:
            e = edge_view(edges[u], d)
            for i in range(d):
                acc += src[edge_target(e[i])]
        dst[u] = acc


@njit(cache=True, parallel=True)
def _step_csr(offsets, keys, n, src, dst):
    for u in prange(n):
        acc = np.uint64(0)
        for i in range(offsets[u], offsets[u + 1]):
            acc += src[keys[i]]
        dst[u] = acc


def reverse_walk(g, steps):
    """Number of ``steps``-edge walks starting at every vertex, modulo 2**64.

    Works on a :class:`DiGraph` (indexed up to ``cap``) or a ``CsrGraph``.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if isinstance(g, DiGraph):
        size = g.cap
        s = g._s

        def step(a, b):
            _step_digraph(s.edges, s.degrees, size, a, b)
    else:
        size = g.n

        def step(a, b):
            _step_csr(g.offsets, g.edge_keys, size, a, b)
    visits0 = np.ones(size, dtype=np.uint64)
    visits1 = np.empty(size, dtype=np.uint64)
    for _ in range(steps):
        step(visits0, visits1)
        visits0, visits1 = visits1, visits0
    return visits0
