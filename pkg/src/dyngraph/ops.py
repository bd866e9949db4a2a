"""Whole-graph operations: deep clone and batch edge deletion/insertion.

A batch is itself a :class:`DiGraph` in sorted, deduplicated form whose
vertices are all endpoints of its edges.
"""
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from ._native import edge_view, mem_copy, thread_id
from .alloc import PAGE_SIZE
from .digraph import (
    BOOL_BITS,
    EDGE_SIZE,
    DiGraph,
    add_edges,
    allocate_block,
    pack_edge,
    set_bit,
    set_difference,
    set_union,
    test_bit,
)
from .mtx import CsrGraph


@dataclass(frozen=True)
class UpdateDelta:
    dn: int = 0
    dm: int = 0


@njit(cache=True, inline="always")
def _has(exists, cap, u):
    return u < cap and test_bit(exists, u)


@njit(cache=True, parallel=True)
def _clone_digraph(exists, edges, degrees, cap, dedges, ddegrees, dcaps, arena, page_size):
    for u in prange(cap):
        if not test_bit(exists, u):
            continue
        d = degrees[u]
        ptr, c = allocate_block(arena, thread_id(), d, page_size)
        if d > 0:
            mem_copy(ptr, edges[u], d * EDGE_SIZE)
        dedges[u] = ptr
        dcaps[u] = c
        ddegrees[u] = d


@njit(cache=True, parallel=True)
def _clone_csr(offsets, keys, values, weighted, n, dedges, ddegrees, dcaps, arena, page_size):
    for u in prange(n):
        lo = offsets[u]
        d = offsets[u + 1] - lo
        ptr, c = allocate_block(arena, thread_id(), d, page_size)
        e = edge_view(ptr, c)
        for i in range(d):
            w = values[lo + i] if weighted else np.float32(1.0)
            e[i] = pack_edge(keys[lo + i], w)
        dedges[u] = ptr
        dcaps[u] = c
        ddegrees[u] = d


def _empty_like_range(cap, page_size):
    h = DiGraph(page_size=page_size)
    h.reserve(cap)
    return h


def _copy_bits(dst, src, cap):
    words = (cap + BOOL_BITS - 1) // BOOL_BITS
    dst[:words] |= src[:words]


def clone_graph(g):
    """Deep copy of a :class:`DiGraph` or :class:`CsrGraph` as a new DiGraph."""
    if isinstance(g, CsrGraph):
        h = _empty_like_range(g.n, PAGE_SIZE)
        s = h._s
        words = (g.n + BOOL_BITS - 1) // BOOL_BITS
        s.exists[:words] = np.uint64(0xFFFFFFFFFFFFFFFF)
        if g.n % BOOL_BITS:
            s.exists[words - 1] = np.uint64((1 << (g.n % BOOL_BITS)) - 1)
        weighted = g.edge_values is not None
        values = g.edge_values if weighted else np.zeros(0, dtype=np.float32)
        _clone_csr(g.offsets, g.edge_keys, values, weighted, g.n,
                   s.edges, s.degrees, s.capacities, s.arena.state, h.page_size)
        h.update(is_unique=True, is_sorted=False)
        return h
    if not isinstance(g, DiGraph):
        raise TypeError(f"cannot clone {type(g).__name__}")
    h = _empty_like_range(g.max_vertex_id() + 1, g.page_size)
    s, src = h._s, g._s
    _copy_bits(s.exists, src.exists, h.cap)
    _clone_digraph(src.exists, src.edges, src.degrees, h.cap,
                   s.edges, s.degrees, s.capacities, s.arena.state, h.page_size)
    h.n, h.m = g.n, g.m
    return h


# --------------------------------------------------------------------------
# deletion


@njit(cache=True, parallel=True)
def _subtract_inplace(exists, edges, degrees, cap, bexists, bedges, bdegrees, bcap):
    dm = 0
    for u in prange(bcap):
        db = bdegrees[u]
        if db == 0 or not test_bit(bexists, u) or not _has(exists, cap, u):
            continue
        d = degrees[u]
        if d == 0:
            continue
        k = set_difference(edge_view(edges[u], d), d, edge_view(bedges[u], db), db)
        degrees[u] = k
        dm += d - k
    return dm


@njit(cache=True, parallel=True)
def _subtract_new(exists, edges, degrees, cap, bexists, bedges, bdegrees, bcap,
                  dedges, ddegrees, dcaps, arena, page_size):
    dm = 0
    for u in prange(cap):
        if not test_bit(exists, u):
            continue
        d = degrees[u]
        ptr, c = allocate_block(arena, thread_id(), d, page_size)
        k = d
        if d > 0:
            mem_copy(ptr, edges[u], d * EDGE_SIZE)
            if _has(bexists, bcap, u) and bdegrees[u] > 0:
                db = bdegrees[u]
                k = set_difference(edge_view(ptr, d), d, edge_view(bedges[u], db), db)
        dedges[u] = ptr
        dcaps[u] = c
        ddegrees[u] = k
        dm += d - k
    return dm


def subtract_inplace(g, batch):
    """Remove the batch's edges from ``g``; vertices missing from ``g`` are skipped."""
    s, b = g._s, batch._s
    dm = int(_subtract_inplace(s.exists, s.edges, s.degrees, g.cap,
                               b.exists, b.edges, b.degrees, batch.cap))
    g.m -= dm
    return UpdateDelta(0, dm)


def subtract_new(g, batch):
    """New graph equal to ``g`` minus the batch's edges; ``g`` is left untouched."""
    h = _empty_like_range(g.max_vertex_id() + 1, g.page_size)
    s, src, b = h._s, g._s, batch._s
    _copy_bits(s.exists, src.exists, h.cap)
    dm = int(_subtract_new(src.exists, src.edges, src.degrees, h.cap,
                           b.exists, b.edges, b.degrees, batch.cap,
                           s.edges, s.degrees, s.capacities, s.arena.state, h.page_size))
    h.n, h.m = g.n, g.m - dm
    return h, UpdateDelta(0, dm)


# --------------------------------------------------------------------------
# insertion


@njit(cache=True, parallel=True)
def _add_inplace(exists, edges, degrees, capacities, arena, page_size,
                 bexists, bedges, bdegrees, bcap):
    dn = 0
    dm = 0
    for u in prange(bcap):
        if not test_bit(bexists, u):
            continue
        if not test_bit(exists, u):
            set_bit(exists, u)
            dn += 1
        db = bdegrees[u]
        if db > 0:
            dm += add_edges(edges, degrees, capacities, arena, thread_id(), u,
                            edge_view(bedges[u], db), page_size)
    return dn, dm


@njit(cache=True, parallel=True)
def _add_new(exists, edges, degrees, cap, bexists, bedges, bdegrees, bcap,
             dcap, dedges, ddegrees, dcaps, arena, page_size):
    dn = 0
    dm = 0
    for u in prange(dcap):
        in_g = _has(exists, cap, u)
        in_b = _has(bexists, bcap, u)
        if not in_g and not in_b:
            continue
        d = degrees[u] if in_g else 0
        db = bdegrees[u] if in_b else 0
        ptr, c = allocate_block(arena, thread_id(), d + db, page_size)
        dst = edge_view(ptr, c)
        if db > 0:
            src = edge_view(edges[u], d) if d > 0 else dst
            k = set_union(dst, src, d, edge_view(bedges[u], db), db)
        else:
            k = d
            if d > 0:
                mem_copy(ptr, edges[u], d * EDGE_SIZE)
        dedges[u] = ptr
        dcaps[u] = c
        ddegrees[u] = k
        dm += k - d
        if not in_g:
            dn += 1
    return dn, dm


def add_inplace(g, batch):
    """Insert the batch's edges into ``g``, adding any new vertices."""
    g.reserve(batch.max_vertex_id() + 1)
    s, b = g._s, batch._s
    dn, dm = _add_inplace(s.exists, s.edges, s.degrees, s.capacities, s.arena.state,
                          g.page_size, b.exists, b.edges, b.degrees, batch.cap)
    delta = UpdateDelta(int(dn), int(dm))
    g.n += delta.dn
    g.m += delta.dm
    return delta


def add_new(g, batch):
    """New graph holding the union of ``g`` and the batch; ``g`` is left untouched.

    Vertices that only appear in the batch receive the batch's edges.
    """
    h = _empty_like_range(max(g.max_vertex_id(), batch.max_vertex_id()) + 1, g.page_size)
    s, src, b = h._s, g._s, batch._s
    dn, dm = _add_new(src.exists, src.edges, src.degrees, g.cap,
                      b.exists, b.edges, b.degrees, batch.cap,
                      h.cap, s.edges, s.degrees, s.capacities, s.arena.state, h.page_size)
    _copy_bits(s.exists, src.exists, min(g.cap, h.cap))
    _copy_bits(s.exists, b.exists, min(batch.cap, h.cap))
    delta = UpdateDelta(int(dn), int(dm))
    h.n, h.m = g.n + delta.dn, g.m + delta.dm
    return h, delta
