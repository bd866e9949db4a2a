import numpy as np
import pytest
from hypothesis import given, strategies as st

from dyngraph._native import using_threads
from dyngraph.alloc import (
    ArenaError,
    ConcurrentArena,
    FixedArena,
    GrowableArena,
    SizeClassArena,
    allocation_size,
    size_class,
)
from stress import run_stress


def _locate(pools, p, pool_size=512 * 1024):
    for i, base in enumerate(pools):
        if base <= p < base + pool_size:
            return i, p - base
    return None


@pytest.fixture
def fixed():
    pool = np.zeros(256, dtype=np.uint8)
    return FixedArena(64, pool), pool.ctypes.data


class TestFixedArena:
    def test_first_allocation_is_pool_base(self, fixed):
        a, base = fixed
        assert a.allocate() == base
        assert a.used == 64

    def test_exhaustion_returns_none(self, fixed):
        a, base = fixed
        assert [a.allocate() for _ in range(4)] == [base, base + 64, base + 128, base + 192]
        assert a.allocate() is None

    def test_freed_block_is_reused(self, fixed):
        a, base = fixed
        for _ in range(4):
            a.allocate()
        a.deallocate(base + 64)
        assert a.allocate() == base + 64

    def test_deallocate_pushes(self, fixed):
        a, base = fixed
        a.allocate()
        assert a.freed == []
        a.deallocate(base)
        assert a.freed == [base]

    def test_lifo_order(self, fixed):
        a, base = fixed
        a.allocate()
        a.allocate()
        a.deallocate(base)
        a.deallocate(base + 64)
        assert a.allocate() == base + 64
        assert a.allocate() == base

    def test_reset(self, fixed):
        a, base = fixed
        a.reset()
        assert a.used == 0 and a.freed == []
        a.allocate()
        a.allocate()
        a.deallocate(base)
        a.reset()
        assert a.used == 0 and a.freed == []
        assert a.allocate() == base

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            FixedArena(12, np.zeros(48, dtype=np.uint8))
        with pytest.raises(ValueError):
            FixedArena(64, np.zeros(100, dtype=np.uint8))

    def test_debug_detects_double_free(self):
        a = FixedArena(64, np.zeros(256, dtype=np.uint8), debug=True)
        p = a.allocate()
        a.deallocate(p)
        with pytest.raises(ArenaError):
            a.deallocate(p)

    @given(st.lists(st.tuples(st.booleans(), st.integers(0, 63)), max_size=200))
    def test_live_blocks_disjoint_and_inside_pool(self, script):
        pool = np.zeros(64 * 16, dtype=np.uint8)
        a = FixedArena(64, pool)
        base = pool.ctypes.data
        live = []
        for alloc, pick in script:
            if alloc or not live:
                p = a.allocate()
                if p is None:
                    assert len(live) == 16
                    continue
                assert p not in live
                live.append(p)
            else:
                a.deallocate(live.pop(pick % len(live)))
            assert a.used <= a.pool_size and a.used % 64 == 0
        for p in live:
            assert base <= p < base + 64 * 16 and (p - base) % 64 == 0
        assert len(set(live)) == len(live)


class TestGrowableArena:
    def test_first_allocation_creates_pool(self):
        a = GrowableArena(64, 256)
        assert a.used == 256
        p = a.allocate()
        assert a.pools == [p]

    def test_new_pool_after_capacity(self):
        a = GrowableArena(64, 256)
        for _ in range(4):
            a.allocate()
        assert len(a.pools) == 1
        a.allocate()
        assert len(a.pools) == 2

    def test_freed_reuse_precedes_bump(self):
        a = GrowableArena(64, 256)
        x = a.allocate()
        a.allocate()
        a.deallocate(x)
        assert a.allocate() == x
        assert a.used == 128

    def test_reset_releases_pools(self):
        a = GrowableArena(64, 256)
        ptrs = [a.allocate() for _ in range(9)]
        assert len(a.pools) == 3
        a.deallocate(ptrs[0])
        a.reset()
        assert a.pools == [] and a.used == 0 and a.freed == []

    def test_allocate_after_reset_makes_fresh_pool(self):
        a = GrowableArena(64, 256)
        a.allocate()
        a.reset()
        p = a.allocate()
        assert a.pools == [p]


class TestAllocationSize:
    @pytest.mark.parametrize("size, expected", [
        (0, 16), (10, 16), (16, 16), (17, 32), (100, 128), (4097, 8192), (8191, 8192),
        (8192, 8192), (10000, 12288),
    ])
    def test_values(self, size, expected):
        assert allocation_size(size) == expected

    @given(st.integers(0, 1 << 24), st.integers(0, 1 << 24))
    def test_properties(self, x, y):
        fx = allocation_size(x)
        assert fx >= x
        assert allocation_size(fx) == fx
        if x <= y:
            assert fx <= allocation_size(y)

    def test_size_class(self):
        assert [size_class(16 << c) for c in range(10)] == list(range(10))
        assert size_class(24) == -1 and size_class(16384) == -1 and size_class(8) == -1


class TestSizeClassArena:
    def test_dispatch(self):
        a = SizeClassArena()
        p = a.allocate(64)
        assert a.class_pools(64) == [p]
        assert a.pool_count == 1
        big = a.allocate(16384)
        odd = a.allocate(24)
        assert a.pool_count == 1
        a.deallocate(big, 16384)
        a.deallocate(odd, 24)

    def test_class_local_reuse(self):
        a = SizeClassArena()
        p = a.allocate(64)
        a.allocate(64)
        a.deallocate(p, 64)
        assert a.allocate(128) != p
        assert a.allocate(64) == p

    def test_reset_empties_all_classes(self):
        a = SizeClassArena()
        for c in range(10):
            a.allocate(16 << c)
        assert a.pool_count == 10
        a.reset()
        assert a.pool_count == 0

    def test_debug_size_mismatch(self):
        a = SizeClassArena(debug=True)
        p = a.allocate(64)
        with pytest.raises(ArenaError):
            a.deallocate(p, 32)

    def test_rejects_small_pool(self):
        with pytest.raises(ValueError):
            SizeClassArena(pool_size=4096)


class TestConcurrentArena:
    def test_state_is_cache_line_aligned(self):
        a = ConcurrentArena(threads=4)
        assert a.state.ctypes.data % 64 == 0
        assert a.state.strides[0] % 64 == 0

    def test_threads_get_disjoint_blocks(self):
        a = ConcurrentArena(threads=2)
        p0 = a.allocate(64, thread=0)
        p1 = a.allocate(64, thread=1)
        assert abs(p0 - p1) >= 64
        assert a.thread_pools(0, 64) != a.thread_pools(1, 64)

    def test_cross_thread_free_migrates(self):
        a = ConcurrentArena(threads=2)
        p = a.allocate(64, thread=0)
        a.deallocate(p, 64, thread=1)
        assert a.thread_freed(1, 64) == [p]
        assert a.allocate(64, thread=1) == p

    def test_allocation_size_matches_p2aa(self):
        a, b = ConcurrentArena(threads=1), SizeClassArena()
        assert all(a.allocation_size(s) == b.allocation_size(s) for s in range(0, 20000, 37))

    def test_single_thread_matches_p2aa(self):
        a, b = ConcurrentArena(threads=1), SizeClassArena()
        rng = np.random.default_rng(3)
        live_a, live_b = [], []
        for _ in range(2000):
            if live_a and rng.random() < 0.4:
                i = int(rng.integers(len(live_a)))
                (pa, size), (pb, _) = live_a.pop(i), live_b.pop(i)
                a.deallocate(pa, size)
                b.deallocate(pb, size)
                continue
            size = int(16 << rng.integers(10))
            pa, pb = a.allocate(size), b.allocate(size)
            # same decision: the same pool and offset within it
            assert _locate(a.thread_pools(0, size), pa) == _locate(b.class_pools(size), pb)
            live_a.append((pa, size))
            live_b.append((pb, size))
        assert a.pool_count == b.pool_count
        for c in range(10):
            size = 16 << c
            assert len(a.thread_freed(0, size)) == len(b.class_freed(size))

    def test_reset_empties_every_thread(self):
        a = ConcurrentArena(threads=3)
        for t in range(3):
            a.allocate(16, thread=t)
            a.allocate(4096, thread=t)
        assert a.pool_count == 6
        a.reset()
        assert a.pool_count == 0

    def test_parallel_stress_small(self):
        a = ConcurrentArena()
        with using_threads(4):
            ops, corrupt, overlap = run_stress(a, 1 << 14, 4, 3)
        assert corrupt == 0 and overlap == 0
        a.reset()
        assert a.pool_count == 0
