"""Parallel Matrix Market (coordinate) loader producing a CSR graph.

The body is cut into fixed-size byte blocks aligned to line boundaries.  Each
worker parses whole blocks into its own edge buffers while counting degrees
into one of ``rho`` partitions.  The per-thread edge lists are then scattered
into ``rho`` partial CSRs, using offsets written one slot ahead so they double
as insertion cursors, and the partial CSRs are merged into partition 0.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit, prange

from ._native import atomic_add, thread_id, using_threads

DEFAULT_BLOCK = 256 * 1024
DEFAULT_PARTITIONS = 4

_FIELDS = {"pattern": False, "real": True, "integer": True}
_SYMMETRIES = {"general": False, "symmetric": True}

# body parse error codes
_ERR_TOKEN = 1
_ERR_RANGE = 2
_ERR_TRUNCATED = 3
_ERR_OVERFLOW = 4


class MtxError(ValueError):
    """Malformed Matrix Market input; ``offset`` is the byte position."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnsupportedFormat(MtxError):
    pass


class VertexRangeError(MtxError):
    pass


@dataclass(frozen=True)
class MtxHeader:
    symmetric: bool
    weighted: bool
    rows: int
    cols: int
    size: int
    header_len: int


@dataclass(frozen=True)
class CsrGraph:
    """Immutable compressed-sparse-row graph; ``edge_values`` is None when unweighted."""

    n: int
    m: int
    offsets: np.ndarray
    edge_keys: np.ndarray
    edge_values: Optional[np.ndarray] = None

    def __post_init__(self):
        for arr in (self.offsets, self.edge_keys, self.edge_values):
            if arr is not None:
                arr.flags.writeable = False

    is_csr = True

    def degree(self, u):
        return int(self.offsets[u + 1] - self.offsets[u]) if 0 <= u < self.n else 0

    def edges_of(self, u):
        from .digraph import EDGE_DTYPE

        if not 0 <= u < self.n:
            return np.zeros(0, dtype=EDGE_DTYPE)
        lo, hi = self.offsets[u], self.offsets[u + 1]
        out = np.empty(hi - lo, dtype=EDGE_DTYPE)
        out["target"] = self.edge_keys[lo:hi]
        out["weight"] = 1.0 if self.edge_values is None else self.edge_values[lo:hi]
        return out

    def max_vertex_id(self):
        return self.n - 1

    def weights(self):
        """Edge weights, materializing ones for unweighted graphs."""
        if self.edge_values is None:
            return np.ones(self.m, dtype=np.float32)
        return self.edge_values


@dataclass
class ThreadEdgeBuffers:
    sources: np.ndarray  # (threads, capacity) uint32
    targets: np.ndarray
    weights: np.ndarray  # (threads, capacity) float32, or (threads, 0) if unweighted
    counts: np.ndarray  # (threads,) int64

    @classmethod
    def allocate(cls, threads, capacity, weighted):
        return cls(
            sources=np.empty((threads, capacity), dtype=np.uint32),
            targets=np.empty((threads, capacity), dtype=np.uint32),
            weights=np.empty((threads, capacity if weighted else 0), dtype=np.float32),
            counts=np.zeros(threads, dtype=np.int64),
        )


class Partitioned:
    """``rho`` equally sized arrays: partition 0 stands alone, the rest share one block.

    Keeping partition 0 separate lets it become the output array directly,
    while the fixed pair layout compiles once for every ``rho``.
    """

    def __init__(self, first, rest):
        self.first = first
        self.rest = rest

    @classmethod
    def empty(cls, rho, size, dtype, zero=False):
        make = np.zeros if zero else np.empty
        return cls(make(size, dtype=dtype), make((rho - 1, size), dtype=dtype))

    def __len__(self):
        return 1 + self.rest.shape[0]

    def __getitem__(self, p):
        if p < 0:
            p += len(self)
        if not 0 <= p < len(self):
            raise IndexError(p)
        return self.first if p == 0 else self.rest[p - 1]

    def __iter__(self):
        return (self[p] for p in range(len(self)))


@dataclass
class PartitionedCsr:
    pdegrees: Partitioned
    poffsets: Partitioned
    pedge_keys: Partitioned
    pedge_values: Partitioned  # zero-length rows when unweighted

    @property
    def rho(self):
        return len(self.poffsets)

    @classmethod
    def allocate(cls, rho, n, m, weighted):
        return cls(
            pdegrees=Partitioned.empty(rho, n, np.int64, zero=True),
            poffsets=Partitioned.empty(rho, n + 1, np.int64),
            pedge_keys=Partitioned.empty(rho, m, np.uint32),
            pedge_values=Partitioned.empty(rho, m if weighted else 0, np.float32),
        )


def _line_end(data, pos):
    nl = data.find(b"\n", pos)
    return len(data) if nl < 0 else nl + 1


def read_header(data):
    """Parse the banner, comment lines and size line of an MTX file."""
    data = bytes(data)
    end = _line_end(data, 0)
    banner = data[:end].decode("ascii", "replace").split()
    if not banner or banner[0] != "%%MatrixMarket":
        raise MtxError("missing %%MatrixMarket banner", 0)
    if len(banner) != 5:
        raise MtxError("banner needs object, format, field and symmetry", 0)
    obj, fmt, field, symmetry = (tok.lower() for tok in banner[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise UnsupportedFormat(f"unsupported object/format {obj} {fmt}", 0)
    if field not in _FIELDS:
        raise UnsupportedFormat(f"unsupported field {field}", 0)
    if symmetry not in _SYMMETRIES:
        raise UnsupportedFormat(f"unsupported symmetry {symmetry}", 0)
    pos = end
    while pos < len(data):
        end = _line_end(data, pos)
        line = data[pos:end].strip()
        if line and not line.startswith(b"%"):
            parts = line.split()
            try:
                rows, cols, size = (int(x) for x in parts)
            except ValueError:
                raise MtxError("malformed size line", pos) from None
            if min(rows, cols, size) < 0:
                raise MtxError("negative size", pos)
            return MtxHeader(_SYMMETRIES[symmetry], _FIELDS[field], rows, cols, size, end)
        pos = end
    raise MtxError("missing size line", pos)


# --------------------------------------------------------------------------
# body parsing (nopython)


@njit(cache=True, inline="always")
def _is_space(c):
    return c == 32 or c == 9 or c == 10 or c == 13


@njit(cache=True, inline="always")
def _is_digit(c):
    return 48 <= c <= 57


@njit(cache=True)
def _next_line(data, pos, end):
    while pos < end:
        if data[pos] == 10:
            return pos + 1
        pos += 1
    return end


@njit(cache=True)
def _block_bounds(data, d, D, i, beta):
    b = d + i
    if b >= D:
        return D, D
    B = min(b + beta, D)
    if b != d and data[b - 1] != 10:
        b = _next_line(data, b, D)
    if B != d and data[B - 1] != 10:
        B = _next_line(data, B, D)
    return b, max(b, B)


@njit(cache=True)
def _skip_space(data, pos, end):
    while pos < end and _is_space(data[pos]):
        pos += 1
    return pos


@njit(cache=True)
def _parse_whole(data, pos, end):
    value = 0
    while pos < end and _is_digit(data[pos]):
        value = value * 10 + (data[pos] - 48)
        pos += 1
    return value, pos


_POW10 = np.array([10.0 ** k for k in range(23)])


@njit(cache=True)
def _scale10(mant, exp10):
    # exact operands and one rounding step whenever |exp10| <= 22
    x = float(mant)
    while exp10 > 22:
        x *= 1e22
        exp10 -= 22
    while exp10 < -22:
        x /= 1e22
        exp10 += 22
    if exp10 >= 0:
        return x * _POW10[exp10]
    return x / _POW10[-exp10]


@njit(cache=True)
def _parse_float(data, pos, end):
    """Returns (value, new_pos, ok)."""
    neg = False
    if pos < end and (data[pos] == 45 or data[pos] == 43):
        neg = data[pos] == 45
        pos += 1
    mant = 0
    digits = 0
    exp10 = 0
    seen = False
    while pos < end and _is_digit(data[pos]):
        seen = True
        if digits < 18:
            mant = mant * 10 + (data[pos] - 48)
            if mant > 0:
                digits += 1
        else:
            exp10 += 1
        pos += 1
    if pos < end and data[pos] == 46:
        pos += 1
        while pos < end and _is_digit(data[pos]):
            seen = True
            if digits < 18:
                mant = mant * 10 + (data[pos] - 48)
                exp10 -= 1
                if mant > 0:
                    digits += 1
            pos += 1
    if not seen:
        return 0.0, pos, False
    if pos < end and (data[pos] == 101 or data[pos] == 69):
        pos += 1
        eneg = False
        if pos < end and (data[pos] == 45 or data[pos] == 43):
            eneg = data[pos] == 45
            pos += 1
        if pos >= end or not _is_digit(data[pos]):
            return 0.0, pos, False
        e = 0
        while pos < end and _is_digit(data[pos]):
            if e < 100000:
                e = e * 10 + (data[pos] - 48)
            pos += 1
        exp10 += -e if eneg else e
    x = _scale10(mant, exp10)
    return (-x if neg else x), pos, True


@njit(cache=True)
def _token_ends(data, pos, end):
    return pos >= end or _is_space(data[pos])


@njit(cache=True, inline="always")
def _part(p, first, rest):
    return first if p == 0 else rest[p - 1]


@njit(cache=True, parallel=True)
def _read_edgelist(data, d, D, beta, symmetric, weighted, nmax, deg_first, deg_rest,
                   sources, targets, weights, counts, err_code, err_pos):
    rho = 1 + deg_rest.shape[0]
    capacity = sources.shape[1]
    nblocks = (D - d + beta - 1) // beta
    for k in prange(nblocks):
        t = thread_id()
        deg = _part(t % rho, deg_first, deg_rest)
        j = counts[t]
        b, B = _block_bounds(data, d, D, k * beta, beta)
        while True:
            b = _skip_space(data, b, B)
            if b >= B:
                break
            at = b
            if not _is_digit(data[b]):
                err_code[k] = _ERR_TOKEN
                err_pos[k] = b
                break
            u, b = _parse_whole(data, b, B)
            if not _token_ends(data, b, B):
                err_code[k] = _ERR_TOKEN
                err_pos[k] = b
                break
            b = _skip_space(data, b, B)
            if b >= B:
                err_code[k] = _ERR_TRUNCATED
                err_pos[k] = at
                break
            if not _is_digit(data[b]):
                err_code[k] = _ERR_TOKEN
                err_pos[k] = b
                break
            v, b = _parse_whole(data, b, B)
            if not _token_ends(data, b, B):
                err_code[k] = _ERR_TOKEN
                err_pos[k] = b
                break
            w = 1.0
            if weighted:
                b = _skip_space(data, b, B)
                if b >= B:
                    err_code[k] = _ERR_TRUNCATED
                    err_pos[k] = at
                    break
                w, b, ok = _parse_float(data, b, B)
                if not ok or not _token_ends(data, b, B):
                    err_code[k] = _ERR_TOKEN
                    err_pos[k] = b
                    break
            if u == 0 or v == 0 or u > nmax or v > nmax:
                err_code[k] = _ERR_RANGE
                err_pos[k] = at
                break
            u -= 1
            v -= 1
            reverse = symmetric and u != v
            if j + (2 if reverse else 1) > capacity:
                err_code[k] = _ERR_OVERFLOW
                err_pos[k] = at
                break
            sources[t, j] = u
            targets[t, j] = v
            if weighted:
                weights[t, j] = w
            atomic_add(deg, u, 1)
            j += 1
            if reverse:
                sources[t, j] = v
                targets[t, j] = u
                if weighted:
                    weights[t, j] = w
                atomic_add(deg, v, 1)
                j += 1
        counts[t] = j


@njit(cache=True, parallel=True)
def _convert_to_csr(off0, offr, keys0, keysr, vals0, valsr, deg0, degr,
                    sources, targets, weights, counts, weighted):
    rho = 1 + degr.shape[0]
    n = deg0.size
    for u in prange(n):
        for p in range(1, rho):
            deg0[u] += degr[p - 1, u]
    m = 0
    for p in range(rho):
        off = _part(p, off0, offr)
        deg = _part(p, deg0, degr)
        off[0] = 0
        acc = 0
        for u in range(n):
            off[u + 1] = acc
            acc += deg[u]
        if p == 0:
            m = acc
    for t in prange(counts.size):
        p = t % rho
        off = _part(p, off0, offr)
        keys = _part(p, keys0, keysr)
        vals = _part(p, vals0, valsr)
        for i in range(counts[t]):
            j = atomic_add(off, sources[t, i] + 1, 1)
            keys[j] = targets[t, i]
            if weighted:
                vals[j] = weights[t, i]
    for u in prange(n):
        j = off0[u + 1]
        for p in range(1, rho):
            off = offr[p - 1]
            for i in range(off[u], off[u + 1]):
                keys0[j] = keysr[p - 1, i]
                if weighted:
                    vals0[j] = valsr[p - 1, i]
                j += 1
        off0[u + 1] = j
    return m


def _as_bytes_array(data):
    if isinstance(data, np.ndarray):
        return data.view(np.uint8).reshape(-1)
    return np.frombuffer(data, dtype=np.uint8)


def get_block(data, i, beta, start=0, end=None):
    """Byte range ``[b, B)`` of the block at offset ``i`` from ``start``, snapped to lines."""
    arr = _as_bytes_array(data)
    end = arr.size if end is None else end
    b, B = _block_bounds(arr, start, end, i, beta)
    return int(b), int(B)


_ERRORS = {
    _ERR_TOKEN: (MtxError, "expected a number"),
    _ERR_RANGE: (VertexRangeError, "vertex id out of range"),
    _ERR_TRUNCATED: (MtxError, "truncated entry"),
    _ERR_OVERFLOW: (MtxError, "more entries than the size line declares"),
}


def read_edgelist(pdegrees, bufs, data, header, beta=DEFAULT_BLOCK):
    """Parse the body into per-thread buffers; returns per-thread edge counts.

    ``data`` is the full file; parsing starts at ``header.header_len``.
    Degrees are counted into ``pdegrees[t % rho]`` for worker thread ``t``;
    ``pdegrees`` is a :class:`Partitioned`.
    """
    arr = _as_bytes_array(data)
    d, D = header.header_len, arr.size
    nblocks = max((D - d + beta - 1) // beta, 0)
    err_code = np.zeros(nblocks, dtype=np.int64)
    err_pos = np.zeros(nblocks, dtype=np.int64)
    nmax = max(header.rows, header.cols)
    _read_edgelist(arr, d, D, beta, header.symmetric, header.weighted, nmax,
                   pdegrees.first, pdegrees.rest, bufs.sources, bufs.targets, bufs.weights,
                   bufs.counts, err_code, err_pos)
    bad = np.flatnonzero(err_code)
    if bad.size:
        k = bad[np.argmin(err_pos[bad])]
        cls, msg = _ERRORS[int(err_code[k])]
        raise cls(msg, int(err_pos[k]))
    return bufs.counts


def convert_to_csr(pcsr, pdegrees, bufs, counts):
    """Merge per-thread edge lists into partition 0 of ``pcsr``; returns the edge count."""
    weighted = bufs.weights.shape[1] > 0
    off, keys, vals = pcsr.poffsets, pcsr.pedge_keys, pcsr.pedge_values
    return int(_convert_to_csr(off.first, off.rest, keys.first, keys.rest, vals.first,
                               vals.rest, pdegrees.first, pdegrees.rest, bufs.sources,
                               bufs.targets, bufs.weights, counts, weighted))


def load_graph(data, rho=DEFAULT_PARTITIONS, beta=DEFAULT_BLOCK, threads=None):
    """Load MTX coordinate bytes into a :class:`CsrGraph`.

    ``threads`` overrides numba's active thread count for the call.
    """
    if rho < 1 or beta < 1:
        raise ValueError("rho and beta must be positive")
    arr = _as_bytes_array(data)
    header = read_header(arr[:1 << 20].tobytes() if arr.size > 1 << 20 else arr.tobytes())
    if header.header_len >= 1 << 20:
        header = read_header(arr.tobytes())
    n = max(header.rows, header.cols)
    m = 2 * header.size if header.symmetric else header.size
    with using_threads(threads) as nthreads:
        bufs = ThreadEdgeBuffers.allocate(nthreads, m, header.weighted)
        pcsr = PartitionedCsr.allocate(rho, n, m, header.weighted)
        counts = read_edgelist(pcsr.pdegrees, bufs, arr, header, beta)
        m = convert_to_csr(pcsr, pcsr.pdegrees, bufs, counts)
    keys = pcsr.pedge_keys.first
    values = pcsr.pedge_values.first if header.weighted else None
    if m < keys.size:
        keys = keys[:m].copy()
        values = None if values is None else values[:m].copy()
    return CsrGraph(n=n, m=m, offsets=pcsr.poffsets.first, edge_keys=keys, edge_values=values)


def format_mtx(n, sources, targets, weights=None, symmetric=False):
    """Render an edge list (0-based ids) as MTX coordinate bytes."""
    field = "pattern" if weights is None else "real"
    kind = "symmetric" if symmetric else "general"
    sources = np.asarray(sources, dtype=np.int64) + 1
    targets = np.asarray(targets, dtype=np.int64) + 1
    head = f"%%MatrixMarket matrix coordinate {field} {kind}\n{n} {n} {sources.size}\n"
    if weights is None:
        body = "".join(f"{u} {v}\n" for u, v in zip(sources.tolist(), targets.tolist()))
    else:
        body = "".join(f"{u} {v} {w!r}\n" for u, v, w in
                       zip(sources.tolist(), targets.tolist(), np.asarray(weights).tolist()))
    return (head + body).encode("ascii")
