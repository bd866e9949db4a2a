"""Mutable directed graph with arena-backed, per-vertex sorted edge lists.

Each edge is one 64-bit word: the target id in the low 32 bits and the
float32 weight bits in the high 32 bits.  Sorting or merging by target then
only needs the low half, and a block of ``d`` edges is ``d * EDGE_SIZE`` bytes.
"""
import weakref

import numpy as np
from numba import njit, prange

from ._native import (
    atomic_add,
    atomic_or,
    bits_f32,
    edge_view,
    f32_bits,
    sys_free,
    thread_id,
)
from .alloc import (
    DEFAULT_POOL_SIZE,
    MAX_CLASS,
    PAGE_SIZE,
    ConcurrentArena,
    allocation_size,
    cp2aa_allocate,
    cp2aa_deallocate,
    cp2aa_reset,
)

BOOL_BITS = 64
EDGE_SIZE = 8
EDGE_DTYPE = np.dtype([("target", np.uint32), ("weight", np.float32)])
INSERTION_SORT_MAX = 32
TARGET_MASK = np.uint64(0xFFFFFFFF)


# --------------------------------------------------------------------------
# edge words


@njit(cache=True, inline="always")
def pack_edge(v, w):
    return np.uint64(v) | (np.uint64(f32_bits(w)) << np.uint64(32))


@njit(cache=True, inline="always")
def edge_target(e):
    return e & TARGET_MASK


@njit(cache=True, inline="always")
def edge_weight(e):
    return bits_f32(np.uint32(e >> np.uint64(32)))


def pack_edges(targets, weights=None):
    """Pack parallel target/weight arrays into edge words."""
    out = np.empty(len(targets), dtype=EDGE_DTYPE)
    out["target"] = targets
    out["weight"] = 1.0 if weights is None else weights
    return out.view(np.uint64)


def as_edge_words(edges):
    """Accept a structured EDGE_DTYPE array, edge words, or (target, weight) pairs."""
    if isinstance(edges, np.ndarray) and edges.dtype == EDGE_DTYPE:
        return np.ascontiguousarray(edges).view(np.uint64)
    if isinstance(edges, np.ndarray) and edges.dtype == np.uint64:
        return np.ascontiguousarray(edges)
    pairs = list(edges)
    if not pairs:
        return np.zeros(0, dtype=np.uint64)
    t, w = zip(*pairs)
    return pack_edges(np.asarray(t), np.asarray(w, dtype=np.float32))


# --------------------------------------------------------------------------
# sorted edge-list primitives


@njit(cache=True)
def set_union(dst, a, na, b, nb):
    """Merge sorted ``a[:na]`` and ``b[:nb]`` into ``dst``; ``b`` wins ties.

    Returns the number of edges written.
    """
    i = 0
    j = 0
    k = 0
    while i < na and j < nb:
        ta = edge_target(a[i])
        tb = edge_target(b[j])
        if ta < tb:
            dst[k] = a[i]
            i += 1
        elif tb < ta:
            dst[k] = b[j]
            j += 1
        else:
            dst[k] = b[j]
            i += 1
            j += 1
        k += 1
    while i < na:
        dst[k] = a[i]
        i += 1
        k += 1
    while j < nb:
        dst[k] = b[j]
        j += 1
        k += 1
    return k


@njit(cache=True)
def set_difference(a, na, b, nb):
    """Drop from sorted ``a[:na]`` every target present in sorted ``b[:nb]``, in place.

    Returns the new length of ``a``.
    """
    i = 0
    j = 0
    k = 0
    while i < na:
        ta = edge_target(a[i])
        while j < nb and edge_target(b[j]) < ta:
            j += 1
        if j < nb and edge_target(b[j]) == ta:
            i += 1
            continue
        a[k] = a[i]
        k += 1
        i += 1
    return k


@njit(cache=True)
def sort_edges(e, n):
    """Stable sort of ``e[:n]`` by target id."""
    if n <= INSERTION_SORT_MAX:
        for i in range(1, n):
            x = e[i]
            t = edge_target(x)
            j = i - 1
            while j >= 0 and edge_target(e[j]) > t:
                e[j + 1] = e[j]
                j -= 1
            e[j + 1] = x
        return
    keys = np.empty(n, dtype=np.uint64)
    for i in range(n):
        keys[i] = (edge_target(e[i]) << np.uint64(32)) | np.uint64(i)
    keys.sort()
    tmp = e[:n].copy()
    for i in range(n):
        e[i] = tmp[np.int64(keys[i] & TARGET_MASK)]


@njit(cache=True)
def unique_edges(e, n):
    """Keep the first edge of every run of equal targets; returns the new length."""
    if n == 0:
        return 0
    k = 1
    for i in range(1, n):
        if edge_target(e[i]) != edge_target(e[k - 1]):
            e[k] = e[i]
            k += 1
    return k


# --------------------------------------------------------------------------
# per-vertex kernels


@njit(cache=True, inline="always")
def test_bit(exists, u):
    return (exists[u >> 6] >> np.uint64(u & 63)) & np.uint64(1) != 0


@njit(cache=True, inline="always")
def set_bit(exists, u):
    atomic_or(exists, u >> 6, np.uint64(1) << np.uint64(u & 63))


@njit(cache=True)
def allocate_block(arena, thread, deg, page_size):
    """Returns (address, capacity in edges) of a block for ``deg`` edges."""
    nbytes = allocation_size(deg * EDGE_SIZE, page_size)
    return cp2aa_allocate(arena, thread, nbytes), nbytes // EDGE_SIZE


@njit(cache=True)
def free_block(arena, thread, ptr, capacity):
    if ptr != 0:
        cp2aa_deallocate(arena, thread, ptr, capacity * EDGE_SIZE)


@njit(cache=True)
def allocate_edges(edges, capacities, arena, thread, u, deg, page_size):
    if u >= edges.size or edges[u] != 0:
        return
    ptr, c = allocate_block(arena, thread, deg, page_size)
    edges[u] = ptr
    capacities[u] = c


@njit(cache=True)
def add_edge_unsafe(edges, degrees, u, e):
    i = atomic_add(degrees, u, 1)
    edge_view(edges[u], i + 1)[i] = e


@njit(cache=True)
def add_edges(edges, degrees, capacities, arena, thread, u, lst, page_size):
    nl = lst.size
    if nl == 0:
        return 0
    d = degrees[u]
    ptr, c = allocate_block(arena, thread, d + nl, page_size)
    dst = edge_view(ptr, c)
    if d > 0:
        k = set_union(dst, edge_view(edges[u], d), d, lst, nl)
    else:
        k = set_union(dst, lst, 0, lst, nl)
    free_block(arena, thread, edges[u], capacities[u])
    edges[u] = ptr
    capacities[u] = c
    degrees[u] = k
    return k - d


@njit(cache=True)
def remove_edges(edges, degrees, u, lst):
    d = degrees[u]
    if lst.size == 0 or d == 0:
        return 0
    k = set_difference(edge_view(edges[u], d), d, lst, lst.size)
    degrees[u] = k
    return d - k


@njit(cache=True, parallel=True)
def _update(exists, edges, degrees, cap, is_unique, is_sorted):
    n = 0
    m = 0
    for u in prange(cap):
        d = degrees[u]
        if d > 1 and not (is_sorted and is_unique):
            e = edge_view(edges[u], d)
            if not is_sorted:
                sort_edges(e, d)
            if not is_unique:
                d = unique_edges(e, d)
                degrees[u] = d
        if test_bit(exists, u):
            n += 1
            m += d
    return n, m


@njit(cache=True)
def highest_bit(exists, cap):
    for k in range((cap + BOOL_BITS - 1) // BOOL_BITS - 1, -1, -1):
        w = exists[k]
        if w != 0:
            b = 63
            while (w >> np.uint64(b)) & np.uint64(1) == 0:
                b -= 1
            return k * BOOL_BITS + b
    return -1


@njit(cache=True, parallel=True)
def _mark_vertices(exists, ids):
    for i in prange(ids.size):
        set_bit(exists, ids[i])


@njit(cache=True, parallel=True)
def _bulk_allocate(exists, edges, capacities, arena, counts, page_size):
    for u in prange(counts.size):
        if test_bit(exists, u):
            allocate_edges(edges, capacities, arena, thread_id(), u, counts[u], page_size)


@njit(cache=True, parallel=True)
def _bulk_insert(edges, degrees, sources, words):
    for i in prange(sources.size):
        add_edge_unsafe(edges, degrees, sources[i], words[i])


@njit(cache=True, parallel=True)
def _gather(edges, degrees, offsets, sources, words):
    for u in prange(offsets.size - 1):
        lo = offsets[u]
        d = offsets[u + 1] - lo
        if d > 0:
            e = edge_view(edges[u], d)
            for i in range(d):
                sources[lo + i] = u
                words[lo + i] = e[i]


@njit(cache=True)
def _copy_edges(addr, d):
    return edge_view(addr, d).copy()


@njit(cache=True)
def _release(edges, capacities, arena):
    # blocks above the largest size class come straight from the system
    for u in range(edges.size):
        if edges[u] != 0 and capacities[u] * EDGE_SIZE > MAX_CLASS:
            sys_free(edges[u])
            edges[u] = 0
    cp2aa_reset(arena)


# --------------------------------------------------------------------------
# growth


def round_up(n, quantum=PAGE_SIZE):
    return -(-n // quantum) * quantum


def reallocate(arr, n0, r0, n1, r1):
    """Resize ``arr`` from ``n0`` used of ``r0`` reserved slots to ``n1`` of ``r1``.

    With an unchanged reservation the slots ``[n0, n1)`` are zeroed in place
    and the same array is returned.
    """
    if r1 == r0:
        if n1 > n0:
            arr[n0:n1] = 0
        return arr
    if n0 == 0:
        return np.zeros(r1, dtype=arr.dtype)
    out = np.empty(r1, dtype=arr.dtype)
    k = min(n0, n1)
    out[:k] = arr[:k]
    out[k:] = 0
    return out


class _Storage:
    """Arrays shared with the finalizer, so teardown sees the latest ones."""

    def __init__(self, arena):
        self.arena = arena
        self.exists = np.zeros(0, dtype=np.uint64)
        self.edges = np.zeros(0, dtype=np.int64)
        self.degrees = np.zeros(0, dtype=np.int64)
        self.capacities = np.zeros(0, dtype=np.int64)

    def release(self):
        _release(self.edges, self.capacities, self.arena.state)


def _release_storage(store):
    store.release()


class DiGraph:
    """Directed graph whose per-vertex edge blocks live in a :class:`ConcurrentArena`.

    Vertices are dense ids below ``cap``; a vertex exists once its bit is set.
    ``n`` and ``m`` are only refreshed by :meth:`update` and the bulk operations.
    """

    is_csr = False

    def __init__(self, pool_size=DEFAULT_POOL_SIZE, page_size=PAGE_SIZE):
        self.page_size = page_size
        self._s = _Storage(ConcurrentArena(pool_size, page_size=page_size))
        self.cap = 0
        self.res = 0
        self.n = 0
        self.m = 0
        weakref.finalize(self, _release_storage, self._s)

    exists = property(lambda self: self._s.exists)
    edges = property(lambda self: self._s.edges)
    degrees = property(lambda self: self._s.degrees)
    capacities = property(lambda self: self._s.capacities)
    arena = property(lambda self: self._s.arena)

    def __repr__(self):
        return f"DiGraph(n={self.n}, m={self.m}, cap={self.cap})"

    # queries

    def has_vertex(self, u):
        return 0 <= u < self.cap and bool(test_bit(self._s.exists, u))

    def degree(self, u):
        return int(self._s.degrees[u]) if 0 <= u < self.cap else 0

    def edge_words(self, u):
        d = self.degree(u)
        if d == 0:
            return np.zeros(0, dtype=np.uint64)
        return _copy_edges(self._s.edges[u], d)

    def edges_of(self, u):
        """Copy of the live edges of ``u`` as an ``EDGE_DTYPE`` array."""
        return self.edge_words(u).view(EDGE_DTYPE)

    def edge_arrays(self):
        """All live edges as ``(sources, EDGE_DTYPE records)``, grouped by source."""
        s = self._s
        offsets = np.zeros(self.cap + 1, dtype=np.int64)
        np.cumsum(s.degrees[:self.cap], out=offsets[1:])
        sources = np.empty(offsets[-1], dtype=np.int64)
        words = np.empty(offsets[-1], dtype=np.uint64)
        _gather(s.edges, s.degrees, offsets, sources, words)
        return sources, words.view(EDGE_DTYPE)

    def vertices(self):
        bits = np.unpackbits(self._s.exists.view(np.uint8), bitorder="little")
        return np.flatnonzero(bits[:self.cap])

    def max_vertex_id(self):
        return int(highest_bit(self._s.exists, self.cap))

    # mutation

    def reserve(self, n):
        if n <= self.cap:
            return
        s = self._s
        r1 = round_up(n, self.page_size)
        r0 = self.res
        s.edges = reallocate(s.edges, self.cap, r0, n, r1)
        s.degrees = reallocate(s.degrees, self.cap, r0, n, r1)
        s.capacities = reallocate(s.capacities, self.cap, r0, n, r1)
        w0 = (self.cap + BOOL_BITS - 1) // BOOL_BITS
        w1 = (n + BOOL_BITS - 1) // BOOL_BITS
        s.exists = reallocate(s.exists, w0, r0 // BOOL_BITS, w1, r1 // BOOL_BITS)
        self.cap = n
        self.res = r1

    def add_vertex(self, u):
        if u < 0:
            raise ValueError("vertex ids are non-negative")
        self.reserve(u + 1)
        set_bit(self._s.exists, u)

    def allocate_edges(self, u, deg):
        s = self._s
        allocate_edges(s.edges, s.capacities, s.arena.state, 0, u, deg, self.page_size)

    def add_edge_unsafe(self, u, v, w=1.0):
        s = self._s
        add_edge_unsafe(s.edges, s.degrees, u, pack_edge(v, np.float32(w)))

    def add_edges(self, u, edges):
        """Merge a sorted, unique edge list into ``u``; returns the degree change."""
        if not self.has_vertex(u):
            return 0
        lst = as_edge_words(edges)
        s = self._s
        return int(add_edges(s.edges, s.degrees, s.capacities, s.arena.state, 0, u, lst,
                             self.page_size))

    def remove_edges(self, u, edges):
        """Remove the targets of a sorted edge list from ``u``; returns the count removed."""
        if not self.has_vertex(u):
            return 0
        s = self._s
        return int(remove_edges(s.edges, s.degrees, u, as_edge_words(edges)))

    def update(self, is_unique=False, is_sorted=False):
        """Sort and deduplicate every edge list as needed, then recount ``n`` and ``m``."""
        s = self._s
        n, m = _update(s.exists, s.edges, s.degrees, self.cap, is_unique, is_sorted)
        self.n, self.m = int(n), int(m)

    # bulk construction

    @classmethod
    def from_edges(cls, sources, targets, weights=None, n=None, **kwargs):
        """Graph holding exactly the given edges; both endpoints become vertices."""
        sources = np.ascontiguousarray(sources, dtype=np.int64)
        targets = np.ascontiguousarray(targets, dtype=np.int64)
        if sources.shape != targets.shape:
            raise ValueError("sources and targets differ in length")
        g = cls(**kwargs)
        top = -1
        if sources.size:
            top = int(max(sources.max(), targets.max()))
            if min(sources.min(), targets.min()) < 0:
                raise ValueError("vertex ids are non-negative")
        g.reserve(max(top + 1, n or 0))
        g.insert_bulk(sources, targets, weights)
        return g

    def insert_bulk(self, sources, targets, weights=None):
        """Add unsorted edges to vertices with no edge storage yet, then update."""
        s = self._s
        _mark_vertices(s.exists, sources)
        _mark_vertices(s.exists, targets)
        counts = np.bincount(sources, minlength=self.cap).astype(np.int64)
        _bulk_allocate(s.exists, s.edges, s.capacities, s.arena.state, counts, self.page_size)
        _bulk_insert(s.edges, s.degrees, sources, pack_edges(targets, weights))
        self.update()

    # inspection

    def snapshot(self):
        """Plain-Python structure used for equality checks."""
        return {
            "n": self.n,
            "m": self.m,
            "vertices": self.vertices().tolist(),
            "edges": {int(u): self.edges_of(u).tolist() for u in self.vertices()
                      if self.degree(u)},
        }

    def close(self):
        """Return every edge block and pool now instead of at garbage collection."""
        self._s.release()
        s = self._s
        s.edges[:] = 0
        s.degrees[:] = 0
        s.capacities[:] = 0
        s.exists[:] = 0
        self.n = self.m = 0


def edge_batch(sources, targets, weights=None):
    """Batch of edge updates as a sorted, deduplicated :class:`DiGraph`."""
    return DiGraph.from_edges(sources, targets, weights)


EdgeBatch = DiGraph
