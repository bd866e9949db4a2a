"""Arena allocators backing per-vertex edge storage.

Four layers, each built on the one before:

* :class:`FixedArena` carves equal blocks out of one caller-supplied pool.
* :class:`GrowableArena` does the same but acquires new pools on demand.
* :class:`SizeClassArena` routes power-of-two sizes 16..8192 to one
  growable arena per class and anything else straight to ``malloc``.
* :class:`ConcurrentArena` keeps one size-class arena per worker thread so
  the allocation path never synchronizes.

Arena state is a row of eight int64 words (one cache line), kept in numpy
arrays so that the same state can be driven from Python or from jitted,
parallel code.  Freed blocks form an intrusive LIFO stack: the first word of
each freed block holds the address of the block below it.  Each growable pool
carries a 16-byte header linking it to the previously acquired pool.
"""
import ctypes
import weakref

import numba
import numpy as np
from numba import njit

from ._native import aligned_zeros, load_word, store_word, sys_free, sys_malloc

PAGE_SIZE = 4096
MIN_CLASS = 16
MAX_CLASS = 8192
NUM_CLASSES = 10
DEFAULT_POOL_SIZE = 512 * 1024
POOL_HEADER = 16

# state row layout
ALLOC_SIZE = 0
POOL_SIZE = 1
USED = 2
POOL = 3
FREE_HEAD = 4
FREE_COUNT = 5
NUM_POOLS = 6
STATE_WORDS = 8


class ArenaError(RuntimeError):
    """Misuse detected by a debug-mode arena (double free, foreign pointer)."""


# --------------------------------------------------------------------------
# nopython core


@njit(cache=True)
def _pop_freed(st):
    ptr = st[FREE_HEAD]
    st[FREE_HEAD] = load_word(ptr)
    st[FREE_COUNT] -= 1
    return ptr


@njit(cache=True)
def _push_freed(st, ptr):
    store_word(ptr, st[FREE_HEAD])
    st[FREE_HEAD] = ptr
    st[FREE_COUNT] += 1


@njit(cache=True)
def faa_allocate(st):
    if st[FREE_HEAD] != 0:
        return _pop_freed(st)
    if st[USED] < st[POOL_SIZE]:
        ptr = st[POOL] + st[USED]
        st[USED] += st[ALLOC_SIZE]
        return ptr
    return 0


@njit(cache=True)
def faa_deallocate(st, ptr):
    _push_freed(st, ptr)


@njit(cache=True)
def faa_reset(st):
    st[FREE_HEAD] = 0
    st[FREE_COUNT] = 0
    st[USED] = 0


@njit(cache=True)
def aa_allocate(st):
    if st[FREE_HEAD] != 0:
        return _pop_freed(st)
    if st[POOL] != 0 and st[USED] < st[POOL_SIZE]:
        ptr = st[POOL] + st[USED]
        st[USED] += st[ALLOC_SIZE]
        return ptr
    raw = sys_malloc(st[POOL_SIZE] + POOL_HEADER)
    if raw == 0:
        return 0
    store_word(raw, st[POOL] - POOL_HEADER if st[POOL] != 0 else 0)
    st[POOL] = raw + POOL_HEADER
    st[NUM_POOLS] += 1
    st[USED] = st[ALLOC_SIZE]
    return st[POOL]


@njit(cache=True)
def aa_deallocate(st, ptr):
    _push_freed(st, ptr)


@njit(cache=True)
def aa_reset(st):
    st[FREE_HEAD] = 0
    st[FREE_COUNT] = 0
    st[USED] = 0
    raw = st[POOL] - POOL_HEADER if st[POOL] != 0 else 0
    while raw != 0:
        prev = load_word(raw)
        sys_free(raw)
        raw = prev
    st[POOL] = 0
    st[NUM_POOLS] = 0


@njit(cache=True)
def size_class(size):
    """Index of the class serving ``size`` bytes, or -1 if unhandled."""
    if size < MIN_CLASS or size > MAX_CLASS or (size & (size - 1)) != 0:
        return -1
    c = 0
    s = size >> 4
    while s > 1:
        s >>= 1
        c += 1
    return c


@njit(cache=True)
def allocation_size(size, page_size=PAGE_SIZE):
    if size <= MIN_CLASS:
        return MIN_CLASS
    if size < MAX_CLASS:
        p = MIN_CLASS
        while p < size:
            p <<= 1
        return p
    return (size + page_size - 1) // page_size * page_size


@njit(cache=True)
def p2aa_allocate(st, size):
    c = size_class(size)
    if c < 0:
        return sys_malloc(size)
    return aa_allocate(st[c])


@njit(cache=True)
def p2aa_deallocate(st, ptr, size):
    c = size_class(size)
    if c < 0:
        sys_free(ptr)
    else:
        aa_deallocate(st[c], ptr)


@njit(cache=True)
def p2aa_reset(st):
    for c in range(NUM_CLASSES):
        aa_reset(st[c])


@njit(cache=True)
def cp2aa_allocate(st, thread, size):
    return p2aa_allocate(st[thread], size)


@njit(cache=True)
def cp2aa_deallocate(st, thread, ptr, size):
    p2aa_deallocate(st[thread], ptr, size)


@njit(cache=True)
def cp2aa_reset(st):
    for t in range(st.shape[0]):
        p2aa_reset(st[t])


def _init_row(row, alloc_size, pool_size, used):
    row[:] = 0
    row[ALLOC_SIZE] = alloc_size
    row[POOL_SIZE] = pool_size
    row[USED] = used


def _walk_freed(row):
    out = []
    ptr = int(row[FREE_HEAD])
    while ptr:
        out.append(ptr)
        ptr = ctypes.c_int64.from_address(ptr).value
    return out


def _walk_pools(row):
    out = []
    raw = int(row[POOL]) - POOL_HEADER if row[POOL] else 0
    while raw:
        out.append(raw + POOL_HEADER)
        raw = ctypes.c_int64.from_address(raw).value
    return out[::-1]


def _check_block_size(alloc_size, pool_size):
    if alloc_size < 8 or alloc_size % 8:
        raise ValueError(f"alloc_size must be a positive multiple of 8, got {alloc_size}")
    if pool_size < alloc_size or pool_size % alloc_size:
        raise ValueError(
            f"pool_size {pool_size} must be a positive multiple of alloc_size {alloc_size}")


class _Shadow:
    """Live-block bookkeeping for debug mode."""

    def __init__(self):
        self.live = {}

    def allocated(self, ptr, size):
        if ptr:
            self.live[ptr] = size

    def freed(self, ptr, size=None):
        got = self.live.pop(ptr, None)
        if got is None:
            raise ArenaError(f"double free or foreign pointer {ptr:#x}")
        if size is not None and got != size:
            raise ArenaError(f"block {ptr:#x} allocated with {got} bytes, freed with {size}")

    def clear(self):
        self.live.clear()


# --------------------------------------------------------------------------
# Python-facing wrappers


class FixedArena:
    """Fixed-capacity arena over a caller-provided pool.

    ``pool`` is either a writable numpy array (kept alive by the arena) or a
    raw integer address; ``pool_size`` defaults to the array's byte length.
    """

    def __init__(self, alloc_size, pool, pool_size=None, debug=False):
        if isinstance(pool, np.ndarray):
            self._buffer = pool
            base = pool.ctypes.data
            pool_size = pool.nbytes if pool_size is None else pool_size
        else:
            self._buffer = None
            base = int(pool)
        if pool_size is None:
            raise ValueError("pool_size is required for a raw pool address")
        _check_block_size(alloc_size, pool_size)
        self.state = aligned_zeros(STATE_WORDS)
        _init_row(self.state, alloc_size, pool_size, 0)
        self.state[POOL] = base
        self._shadow = _Shadow() if debug else None

    alloc_size = property(lambda self: int(self.state[ALLOC_SIZE]))
    pool_size = property(lambda self: int(self.state[POOL_SIZE]))
    pool = property(lambda self: int(self.state[POOL]))
    used = property(lambda self: int(self.state[USED]))

    @property
    def freed(self):
        """Freed block addresses, most recently freed first."""
        return _walk_freed(self.state)

    def allocate(self):
        ptr = faa_allocate(self.state)
        if self._shadow is not None:
            self._shadow.allocated(ptr, self.alloc_size)
        return ptr or None

    def deallocate(self, ptr):
        if self._shadow is not None:
            self._shadow.freed(ptr)
        faa_deallocate(self.state, ptr)

    def reset(self):
        faa_reset(self.state)
        if self._shadow is not None:
            self._shadow.clear()


class GrowableArena:
    """Arena of ``alloc_size`` blocks that acquires ``pool_size`` pools on demand."""

    def __init__(self, alloc_size, pool_size=DEFAULT_POOL_SIZE, debug=False):
        _check_block_size(alloc_size, pool_size)
        self.state = aligned_zeros(STATE_WORDS)
        # used == pool_size forces a pool on first allocation
        _init_row(self.state, alloc_size, pool_size, pool_size)
        self._shadow = _Shadow() if debug else None
        weakref.finalize(self, aa_reset, self.state)

    alloc_size = property(lambda self: int(self.state[ALLOC_SIZE]))
    pool_size = property(lambda self: int(self.state[POOL_SIZE]))
    used = property(lambda self: int(self.state[USED]))

    @property
    def pools(self):
        """Base addresses of owned pools, oldest first."""
        return _walk_pools(self.state)

    @property
    def freed(self):
        return _walk_freed(self.state)

    def allocate(self):
        ptr = aa_allocate(self.state)
        if self._shadow is not None:
            self._shadow.allocated(ptr, self.alloc_size)
        return ptr or None

    def deallocate(self, ptr):
        if self._shadow is not None:
            self._shadow.freed(ptr)
        aa_deallocate(self.state, ptr)

    def reset(self):
        aa_reset(self.state)
        if self._shadow is not None:
            self._shadow.clear()


def _check_pool_size(pool_size):
    if pool_size < MAX_CLASS or pool_size % MAX_CLASS:
        raise ValueError(f"pool_size must be a positive multiple of {MAX_CLASS}, got {pool_size}")


def _init_classes(rows, pool_size):
    for c in range(NUM_CLASSES):
        _init_row(rows[c], MIN_CLASS << c, pool_size, pool_size)


class SizeClassArena:
    """Power-of-two size-class arena (16..8192 bytes); other sizes go to malloc.

    Callers are expected to round requests with :meth:`allocation_size` and to
    pass the same size back to :meth:`deallocate`.
    """

    def __init__(self, pool_size=DEFAULT_POOL_SIZE, page_size=PAGE_SIZE, debug=False):
        _check_pool_size(pool_size)
        self.page_size = page_size
        self.state = aligned_zeros((NUM_CLASSES, STATE_WORDS))
        _init_classes(self.state, pool_size)
        self._shadow = _Shadow() if debug else None
        weakref.finalize(self, p2aa_reset, self.state)

    pool_size = property(lambda self: int(self.state[0, POOL_SIZE]))

    def allocation_size(self, size):
        return int(allocation_size(size, self.page_size))

    def allocate(self, size):
        ptr = p2aa_allocate(self.state, size)
        if self._shadow is not None:
            self._shadow.allocated(ptr, size)
        return ptr or None

    def deallocate(self, ptr, size):
        if self._shadow is not None:
            self._shadow.freed(ptr, size)
        p2aa_deallocate(self.state, ptr, size)

    def reset(self):
        p2aa_reset(self.state)
        if self._shadow is not None:
            self._shadow.clear()

    def class_pools(self, size):
        return _walk_pools(self.state[size_class(size)])

    def class_freed(self, size):
        return _walk_freed(self.state[size_class(size)])

    @property
    def pool_count(self):
        return int(self.state[:, NUM_POOLS].sum())


class ConcurrentArena:
    """One :class:`SizeClassArena` per worker thread, each on its own cache lines.

    ``threads`` defaults to the size of numba's thread pool, so every value
    returned by ``numba.get_thread_id()`` inside a parallel region is a valid
    thread index.  Blocks may be freed by any thread; they then join the
    freeing thread's free lists.
    """

    def __init__(self, pool_size=DEFAULT_POOL_SIZE, threads=None, page_size=PAGE_SIZE,
                 debug=False):
        _check_pool_size(pool_size)
        if threads is None:
            threads = numba.config.NUMBA_NUM_THREADS
        self.page_size = page_size
        self.state = aligned_zeros((threads, NUM_CLASSES, STATE_WORDS))
        for t in range(threads):
            _init_classes(self.state[t], pool_size)
        self._shadow = _Shadow() if debug else None
        weakref.finalize(self, cp2aa_reset, self.state)

    pool_size = property(lambda self: int(self.state[0, 0, POOL_SIZE]))
    threads = property(lambda self: self.state.shape[0])

    def allocation_size(self, size):
        return int(allocation_size(size, self.page_size))

    def allocate(self, size, thread=0):
        ptr = cp2aa_allocate(self.state, thread, size)
        if self._shadow is not None:
            self._shadow.allocated(ptr, size)
        return ptr or None

    def deallocate(self, ptr, size, thread=0):
        if self._shadow is not None:
            self._shadow.freed(ptr, size)
        cp2aa_deallocate(self.state, thread, ptr, size)

    def reset(self):
        """Release every pool of every thread.  Needs exclusive access."""
        cp2aa_reset(self.state)
        if self._shadow is not None:
            self._shadow.clear()

    @property
    def pool_count(self):
        return int(self.state[:, :, NUM_POOLS].sum())

    def thread_pools(self, thread, size):
        return _walk_pools(self.state[thread, size_class(size)])

    def thread_freed(self, thread, size):
        return _walk_freed(self.state[thread, size_class(size)])

