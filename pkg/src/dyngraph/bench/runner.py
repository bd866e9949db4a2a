"""Timed workloads and CSV reporting."""
import csv
import math
import time
from dataclasses import asdict, dataclass, fields
from itertools import groupby
from typing import Optional

import numpy as np

from .._native import using_threads
from ..mtx import format_mtx, load_graph
from ..ops import add_inplace, add_new, clone_graph, subtract_inplace, subtract_new
from ..walk import reverse_walk
from .allocbench import ALLOCATORS, time_workload
from .baseline import BaselineGraph
from .batches import BatchSpec, generate_batch, make_rng, parse_graph_spec, synth_graph

BATCH_WORKLOADS = {
    "delete": ("delete", subtract_inplace, True),
    "delete-new": ("delete", subtract_new, False),
    "insert": ("insert", add_inplace, True),
    "insert-new": ("insert", add_new, False),
}
ALLOC_WORKLOADS = {"alloc-alloc": "alloc", "alloc-free": "free", "alloc-mixed": "mixed"}
WORKLOADS = ("load", "clone", *BATCH_WORKLOADS, "walk", *ALLOC_WORKLOADS)
WARMUP = 1  # untimed leading runs that absorb cache loading and pool start-up
FULL_CHECK_EDGES = 100_000
SAMPLED_VERTICES = 1000


@dataclass
class TimingRecord:
    workload: str
    graph: str
    n: int
    m: int
    fraction: Optional[float]
    trial: object
    seconds: float
    alloc_seconds: Optional[float] = None
    copy_seconds: Optional[float] = None
    impl: str = ""


COLUMNS = [f.name for f in fields(TimingRecord)]


@dataclass
class SuiteConfig:
    workload: str
    graph: Optional[str] = None
    fractions: tuple = (1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
    repeats: int = 5
    threads: Optional[int] = None
    steps: int = 42
    seed: int = 42
    rho: int = 4
    beta: int = 256 * 1024
    count: int = 1 << 20
    rounds: int = 8
    verify: bool = True


class VerificationError(AssertionError):
    pass


def geomean(values):
    values = list(values)
    if any(v <= 0 for v in values):
        return 0.0 if values else math.nan
    if len(set(values)) == 1:
        return values[0]
    return math.exp(sum(math.log(v) for v in values) / len(values))


def with_geomeans(records):
    """Trial rows followed by one geometric-mean row per (workload, graph, impl, fraction)."""
    key = lambda r: (r.workload, r.graph, r.impl, -1.0 if r.fraction is None else r.fraction)
    out = list(records)
    for _, grp in groupby(sorted(records, key=key), key=key):
        grp = list(grp)
        if len(grp) < 2:
            continue
        opt = lambda name: (None if getattr(grp[0], name) is None
                            else geomean(getattr(r, name) for r in grp))
        out.append(TimingRecord(grp[0].workload, grp[0].graph, grp[0].n, grp[0].m,
                                grp[0].fraction, "geomean", geomean(r.seconds for r in grp),
                                opt("alloc_seconds"), opt("copy_seconds"), grp[0].impl))
    return out


def write_csv(records, stream):
    w = csv.DictWriter(stream, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: ("" if v is None else v) for k, v in asdict(r).items()})


def read_csv(stream):
    """Inverse of :func:`write_csv`."""
    out = []
    for row in csv.DictReader(stream):
        opt = lambda k: None if row[k] == "" else float(row[k])
        trial = row["trial"] if row["trial"] == "geomean" else int(row["trial"])
        out.append(TimingRecord(row["workload"], row["graph"], int(row["n"]), int(row["m"]),
                                opt("fraction"), trial, float(row["seconds"]),
                                opt("alloc_seconds"), opt("copy_seconds"), row["impl"]))
    return out


# --------------------------------------------------------------------------
# inputs


def load_input(spec, rho=4, beta=256 * 1024):
    """Returns (name, CsrGraph, MTX bytes or None) for a path or ``synth:n,m,seed``."""
    synth = parse_graph_spec(spec)
    if synth is not None:
        return spec, synth_graph(*synth), None
    with open(spec, "rb") as f:
        data = f.read()
    return spec, load_graph(data, rho=rho, beta=beta), data


def csr_to_mtx(csr):
    sources = np.repeat(np.arange(csr.n), np.diff(csr.offsets))
    return format_mtx(csr.n, sources, csr.edge_keys, csr.edge_values)


# --------------------------------------------------------------------------
# verification


def _edge_keys(g):
    sources, records = g.edge_arrays()
    return (sources.astype(np.uint64) << np.uint64(32)) | records["target"].astype(np.uint64)


def verify_batch(before_keys, batch, kind, result, rng):
    """Compare ``result`` against a plain set computation of the expected edges."""
    bkeys = _edge_keys(batch)
    if kind == "delete":
        expected = np.setdiff1d(before_keys, bkeys, assume_unique=True)
    else:
        expected = np.union1d(before_keys, bkeys)
    if expected.size <= FULL_CHECK_EDGES:
        got = _edge_keys(result)
        if got.size != expected.size or not np.array_equal(np.sort(got), expected):
            raise VerificationError(f"{kind} result differs from the expected edge set")
        return
    top = result.max_vertex_id() + 1
    for u in rng.choice(top, min(SAMPLED_VERTICES, top), replace=False):
        lo, hi = np.searchsorted(expected, [np.uint64(u) << np.uint64(32),
                                           np.uint64(u + 1) << np.uint64(32)])
        want = (expected[lo:hi] & np.uint64(0xFFFFFFFF)).astype(np.uint32)
        if not np.array_equal(result.edges_of(int(u))["target"], want):
            raise VerificationError(f"{kind} result differs at vertex {u}")


# --------------------------------------------------------------------------
# workloads


def _timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def run_suite(cfg):
    """Run one workload per ``cfg`` and return its TimingRecords (geomeans included)."""
    if cfg.workload not in WORKLOADS:
        raise ValueError(f"unknown workload {cfg.workload!r}")
    with using_threads(cfg.threads) as threads:
        if cfg.workload in ALLOC_WORKLOADS:
            records = _run_alloc(cfg, threads)
        else:
            name, csr, data = load_input(cfg.graph, cfg.rho, cfg.beta)
            records = _run_graph(cfg, name, csr, data)
    return with_geomeans(records)


def _run_alloc(cfg, threads):
    kind = ALLOC_WORKLOADS[cfg.workload]
    rounds = cfg.rounds if kind == "mixed" else 1
    out = []
    for alloc in ALLOCATORS:
        for trial in range(-WARMUP, cfg.repeats):
            secs = time_workload(kind, alloc, cfg.count, threads, rounds)
            if trial >= 0:
                out.append(TimingRecord(cfg.workload, f"{cfg.count}x64B", cfg.count, 0,
                                        None, trial, secs, impl=alloc))
    return out


def _run_graph(cfg, name, csr, data):
    w = cfg.workload
    out = []

    def rec(trial, secs, fraction=None, **kw):
        if trial >= 0:
            out.append(TimingRecord(w, name, csr.n, csr.m, fraction, trial, secs, **kw))

    trials = range(-WARMUP, cfg.repeats)

    if w == "load":
        data = csr_to_mtx(csr) if data is None else data
        for trial in trials:
            _, secs = _timed(load_graph, data, cfg.rho, cfg.beta)
            rec(trial, secs, impl="csr")
        return out
    base = clone_graph(csr)
    if w == "clone":
        # each implementation runs its trials back to back so neither
        # recycles memory the other just released
        for trial in trials:
            copy, secs = _timed(clone_graph, base)
            copy.close()
            rec(trial, secs, impl="digraph")
        base.close()
        baseline = BaselineGraph.from_csr(csr)
        for trial in trials:
            bcopy, a, c = baseline.clone()
            bcopy.close()
            rec(trial, a + c, alloc_seconds=a, copy_seconds=c, impl="baseline")
        baseline.close()
        return out
    if w == "walk":
        for trial in trials:
            _, secs = _timed(reverse_walk, base, cfg.steps)
            rec(trial, secs, impl="digraph")
        base.close()
        return out
    kind, op, inplace = BATCH_WORKLOADS[w]
    before = _edge_keys(base) if cfg.verify else None
    for fraction in cfg.fractions:
        spec = BatchSpec(kind, fraction, cfg.seed, cfg.repeats)
        for trial in trials:
            batch = generate_batch(base, spec, max(trial, 0))
            target = clone_graph(base) if inplace else base
            result, secs = _timed(op, target, batch)
            graph = target if inplace else result[0]
            if cfg.verify:
                verify_batch(before, batch, kind, graph, make_rng(cfg.seed, max(trial, 0), 1))
            graph.close()
            batch.close()
            rec(trial, secs, fraction=fraction, impl="digraph")
    base.close()
    return out
