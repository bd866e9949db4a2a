"""Reproducible random graphs and edge batches.

All randomness comes from numpy's PCG64 seeded through ``SeedSequence``, so a
``(seed, trial)`` pair always yields the same stream.
"""
from dataclasses import dataclass

import numpy as np

from ..digraph import edge_batch
from ..mtx import CsrGraph

KINDS = ("delete", "insert")


def make_rng(seed, *spawn_key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=spawn_key)))


@dataclass(frozen=True)
class BatchSpec:
    kind: str
    fraction: float
    seed: int = 0
    repeats: int = 5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown batch kind {self.kind!r}")
        if not 0 < self.fraction <= 0.1:
            raise ValueError("fraction must lie in (0, 0.1]")
        if self.repeats < 1:
            raise ValueError("repeats must be positive")

    def size(self, m):
        return max(1, int(round(self.fraction * m)))


def generate_batch(g, spec, trial=0):
    """Random batch for ``g``: existing edges to delete or vertex pairs to insert."""
    rng = make_rng(spec.seed, trial)
    k = spec.size(g.m)
    if spec.kind == "delete":
        sources, records = g.edge_arrays()
        if sources.size == 0:
            raise ValueError("cannot sample deletions from a graph without edges")
        pick = rng.choice(sources.size, min(k, sources.size), replace=False)
        return edge_batch(sources[pick], records["target"][pick].astype(np.int64),
                          records["weight"][pick])
    n = g.max_vertex_id() + 1
    if n <= 0:
        raise ValueError("cannot sample insertions for a graph without vertices")
    pairs = rng.integers(0, n, size=(2, k))
    return edge_batch(pairs[0], pairs[1])


def synth_graph(n, m, seed=0):
    """Uniform random simple directed graph with ``n`` vertices and ``m`` edges."""
    if n < 0 or m < 0 or m > n * (n - 1):
        raise ValueError(f"no simple directed graph has {n} vertices and {m} edges")
    rng = make_rng(seed)
    idx = np.sort(rng.choice(n * (n - 1), m, replace=False)) if m else np.zeros(0, np.int64)
    u = idx // max(n - 1, 1)
    r = idx % max(n - 1, 1)
    v = r + (r >= u)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(u, minlength=n), out=offsets[1:])
    return CsrGraph(n=n, m=m, offsets=offsets, edge_keys=v.astype(np.uint32))


def parse_graph_spec(text):
    """``synth:n,m,seed`` -> (n, m, seed), or None for a file path."""
    if not text.startswith("synth:"):
        return None
    parts = text[len("synth:"):].split(",")
    if len(parts) not in (2, 3):
        raise ValueError(f"bad synthetic graph spec {text!r}")
    n, m = int(parts[0]), int(parts[1])
    seed = int(parts[2]) if len(parts) == 3 else 0
    return n, m, seed
