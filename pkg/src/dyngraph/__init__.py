"""Dynamic directed graphs on arena-allocated adjacency storage.

Submodules import numba on first use, so importing the package itself stays
cheap and leaves the worker-pool size configurable.
"""
import importlib

__version__ = "0.1.0"

_EXPORTS = {
    "FixedArena": "alloc",
    "GrowableArena": "alloc",
    "SizeClassArena": "alloc",
    "ConcurrentArena": "alloc",
    "allocation_size": "alloc",
    "CsrGraph": "mtx",
    "MtxHeader": "mtx",
    "MtxError": "mtx",
    "read_header": "mtx",
    "load_graph": "mtx",
    "DiGraph": "digraph",
    "EdgeBatch": "digraph",
    "edge_batch": "digraph",
    "EDGE_DTYPE": "digraph",
    "UpdateDelta": "ops",
    "clone_graph": "ops",
    "subtract_inplace": "ops",
    "subtract_new": "ops",
    "add_inplace": "ops",
    "add_new": "ops",
    "reverse_walk": "walk",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    mod = _EXPORTS.get(name)
    if mod is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    value = getattr(importlib.import_module(f".{mod}", __name__), name)
    globals()[name] = value
    return value
