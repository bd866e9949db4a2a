"""Concurrent allocator stress harness with sentinel and overlap checks."""
import numpy as np
from numba import njit, prange

from dyngraph._native import thread_id, word_view
from dyngraph.alloc import cp2aa_allocate, cp2aa_deallocate

SIZES = np.array([16, 32, 64, 128, 256], dtype=np.int64)


@njit(cache=True)
def _sentinel(i, r, k):
    return np.uint32((i * 2654435761 + r * 40503 + k) & 0xFFFFFFFF)


@njit(cache=True, parallel=True)
def _alloc_phase(state, addrs, sizes, slices, r):
    per = addrs.size // slices
    for s in prange(slices):
        t = thread_id()
        for i in range(s * per, (s + 1) * per):
            p = cp2aa_allocate(state, t, sizes[i])
            addrs[i] = p
            if p != 0:
                w = word_view(p, sizes[i] // 4)
                for k in range(w.size):
                    w[k] = _sentinel(i, r, k)


@njit(cache=True, parallel=True)
def _verify_phase(addrs, sizes, r, bad):
    for i in prange(addrs.size):
        if addrs[i] == 0:
            bad[i] = 1
            continue
        w = word_view(addrs[i], sizes[i] // 4)
        for k in range(w.size):
            if w[k] != _sentinel(i, r, k):
                bad[i] = 1
                break


@njit(cache=True, parallel=True)
def _free_phase(state, addrs, sizes, slices, shift):
    # slice s releases the blocks of slice s + shift, so blocks migrate threads
    per = addrs.size // slices
    for s in prange(slices):
        t = thread_id()
        o = (s + shift) % slices
        for i in range(o * per, (o + 1) * per):
            cp2aa_deallocate(state, t, addrs[i], sizes[i])


def overlaps(addrs, sizes):
    order = np.argsort(addrs)
    a, z = addrs[order], sizes[order]
    return int(np.count_nonzero(a[:-1] + z[:-1] > a[1:]))


def run_stress(arena, count, slices, rounds):
    """Returns (total ops, corrupted blocks, overlapping pairs)."""
    count = count // slices * slices
    sizes = SIZES[np.arange(count) % SIZES.size]
    addrs = np.zeros(count, dtype=np.int64)
    corrupt = overlap = 0
    for r in range(rounds):
        _alloc_phase(arena.state, addrs, sizes, slices, r)
        bad = np.zeros(count, dtype=np.int64)
        _verify_phase(addrs, sizes, r, bad)
        corrupt += int(bad.sum())
        overlap += overlaps(addrs, sizes)
        _free_phase(arena.state, addrs, sizes, slices, r + 1)
    return 2 * count * rounds, corrupt, overlap
