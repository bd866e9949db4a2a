"""Allocator micro-benchmarks: allocation-only, deallocation-only and mixed.

Every workload splits ``count`` 64-byte operations evenly over ``threads``
slices run in parallel.  Non-concurrent arenas (FAA, AA) get one instance per
slice; CP2AA is shared and indexed by the executing thread.
"""
import time

import numba
import numpy as np
from numba import njit, prange

from .._native import aligned_zeros, sys_free, sys_malloc, thread_id
from ..alloc import (
    NUM_CLASSES,
    POOL,
    STATE_WORDS,
    aa_allocate,
    aa_deallocate,
    aa_reset,
    cp2aa_allocate,
    cp2aa_deallocate,
    cp2aa_reset,
    faa_allocate,
    faa_deallocate,
    faa_reset,
    _init_classes,
    _init_row,
)

ALLOCATORS = ("system", "faa", "aa", "cp2aa")
SYSTEM, FAA, AA, CP2AA = range(4)
BLOCK = 64


@njit(cache=True)
def _alloc_one(kind, rows, cstate, slot, size):
    if kind == SYSTEM:
        return sys_malloc(size)
    if kind == FAA:
        return faa_allocate(rows[slot])
    if kind == AA:
        return aa_allocate(rows[slot])
    return cp2aa_allocate(cstate, thread_id(), size)


@njit(cache=True)
def _free_one(kind, rows, cstate, slot, ptr, size):
    if kind == SYSTEM:
        sys_free(ptr)
    elif kind == FAA:
        faa_deallocate(rows[slot], ptr)
    elif kind == AA:
        aa_deallocate(rows[slot], ptr)
    else:
        cp2aa_deallocate(cstate, thread_id(), ptr, size)


@njit(cache=True, parallel=True)
def _allocate_all(kind, rows, cstate, addrs, slices):
    per = addrs.size // slices
    for s in prange(slices):
        for i in range(s * per, (s + 1) * per):
            addrs[i] = _alloc_one(kind, rows, cstate, s, BLOCK)


@njit(cache=True, parallel=True)
def _free_all(kind, rows, cstate, addrs, slices):
    per = addrs.size // slices
    for s in prange(slices):
        for i in range(s * per, (s + 1) * per):
            _free_one(kind, rows, cstate, s, addrs[i], BLOCK)


@njit(cache=True, parallel=True)
def _mixed(kind, rows, cstate, addrs, slices, rounds):
    per = addrs.size // slices
    for s in prange(slices):
        for _ in range(rounds):
            for i in range(s * per, (s + 1) * per):
                addrs[i] = _alloc_one(kind, rows, cstate, s, BLOCK)
            for i in range(s * per, (s + 1) * per):
                _free_one(kind, rows, cstate, s, addrs[i], BLOCK)


class AllocatorHarness:
    """Holds the allocator instances for one workload run."""

    def __init__(self, allocator, count, threads, pool_size=512 * 1024):
        if allocator not in ALLOCATORS:
            raise ValueError(f"unknown allocator {allocator!r}")
        self.kind = ALLOCATORS.index(allocator)
        self.slices = threads
        self.count = count // threads * threads
        self.addrs = np.zeros(self.count, dtype=np.int64)
        self.rows = aligned_zeros((threads, STATE_WORDS))
        self.cstate = aligned_zeros((numba.config.NUMBA_NUM_THREADS, NUM_CLASSES, STATE_WORDS))
        self._fixed_pools = []
        for s in range(threads):
            if self.kind == FAA:
                # each slice owns a pool large enough for its share
                nbytes = self.count // threads * BLOCK
                pool = np.empty(nbytes, dtype=np.uint8)
                self._fixed_pools.append(pool)
                _init_row(self.rows[s], BLOCK, nbytes, 0)
                self.rows[s, POOL] = pool.ctypes.data
            else:
                _init_row(self.rows[s], BLOCK, pool_size, pool_size)
        for t in range(self.cstate.shape[0]):
            _init_classes(self.cstate[t], pool_size)

    def allocate_all(self):
        _allocate_all(self.kind, self.rows, self.cstate, self.addrs, self.slices)

    def free_all(self):
        _free_all(self.kind, self.rows, self.cstate, self.addrs, self.slices)

    def mixed(self, rounds):
        _mixed(self.kind, self.rows, self.cstate, self.addrs, self.slices, rounds)

    def close(self):
        if self.kind == FAA:
            for s in range(self.slices):
                faa_reset(self.rows[s])
        elif self.kind == AA:
            for s in range(self.slices):
                aa_reset(self.rows[s])
        cp2aa_reset(self.cstate)


def time_workload(workload, allocator, count, threads, rounds=1):
    """Seconds spent in ``workload`` ("alloc", "free" or "mixed")."""
    h = AllocatorHarness(allocator, count, threads)
    try:
        if workload == "alloc":
            t0 = time.perf_counter()
            h.allocate_all()
            return time.perf_counter() - t0
        if workload == "free":
            h.allocate_all()
            t0 = time.perf_counter()
            h.free_all()
            return time.perf_counter() - t0
        if workload == "mixed":
            t0 = time.perf_counter()
            h.mixed(rounds)
            return time.perf_counter() - t0
        raise ValueError(f"unknown allocator workload {workload!r}")
    finally:
        if workload == "alloc" and h.kind == SYSTEM:
            h.free_all()
        h.close()
