"""End-to-end acceptance checks; each prints one PASS/FAIL line.

Kernels are compiled (or loaded from numba's cache) before any timer starts,
so the time limits measure the operations themselves.
"""
import statistics
import time

import numpy as np
import pytest

from conftest import DATA
from dyngraph._native import using_threads
from dyngraph.alloc import ConcurrentArena
from dyngraph.bench.allocbench import time_workload
from dyngraph.bench.batches import BatchSpec, generate_batch, synth_graph
from dyngraph.bench.runner import SuiteConfig, csr_to_mtx, run_suite
from dyngraph.digraph import DiGraph, edge_batch
from dyngraph.mtx import load_graph
from dyngraph.ops import add_inplace, add_new, clone_graph, subtract_inplace, subtract_new
from dyngraph.walk import reverse_walk
from oracles import (
    GraphOracle,
    csr_multisets,
    edge_multisets,
    random_simple_edges,
    reference_mtx,
    walk_oracle,
)
from stress import run_stress


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
    return emit


def corpus_bytes():
    return {p.stem: p.read_bytes() for p in sorted(DATA.glob("*.mtx"))}


def canonical(csr):
    """Edge arrays sorted by (source, target, weight bits)."""
    src = np.repeat(np.arange(csr.n), np.diff(csr.offsets))
    wb = csr.weights().view(np.uint32)
    order = np.lexsort((wb, csr.edge_keys, src))
    return csr.n, csr.m, src[order], csr.edge_keys[order], wb[order]


def test_criterion_1_loader_correctness(report):
    files = corpus_bytes()
    load_graph(files["real_general"], rho=2, threads=2)
    t0 = time.perf_counter()
    bad = []
    for name, data in files.items():
        g = load_graph(data)
        n, edges = reference_mtx(data)
        if (g.n, g.m) != (n, len(edges)) or csr_multisets(g) != edge_multisets(n, edges):
            bad.append(name)
    secs = time.perf_counter() - t0
    ok = len(files) >= 6 and not bad and secs < 1.0
    report(1, ok, f"{len(files)} files, mismatches={bad}, {secs:.3f}s")
    assert ok


def test_criterion_2_loader_determinism(report):
    inputs = dict(corpus_bytes())
    for m in (1000, 100_000, 1_000_000):
        csr = synth_graph(max(m // 10, 10), m, seed=m)
        inputs[f"synth{m}"] = csr_to_mtx(csr)
    load_graph(inputs["real_general"], rho=1, threads=1)
    t0 = time.perf_counter()
    bad = []
    for name, data in inputs.items():
        ref = None
        for threads in (1, 2, 4, 8):
            for rho in (1, 2, 4):
                got = canonical(load_graph(data, rho=rho, threads=threads))
                if ref is None:
                    ref = got
                elif got[:2] != ref[:2] or not all(np.array_equal(a, b)
                                                   for a, b in zip(got[2:], ref[2:])):
                    bad.append((name, threads, rho))
    secs = time.perf_counter() - t0
    ok = not bad and secs < 30
    report(2, ok, f"{len(inputs)} inputs x 12 configs, mismatches={bad[:3]}, {secs:.1f}s")
    assert ok


def _random_sequence(rng, g, ref):
    n = int(rng.integers(1, 129))
    budget = 2048
    for _ in range(int(rng.integers(1, 40))):
        op = rng.integers(4)
        u = int(rng.integers(n))
        if op == 0:
            g.add_vertex(u)
            ref.add_vertex(u)
        elif op == 1:
            k = int(rng.integers(0, min(64, budget) + 1))
            targets = np.unique(rng.integers(0, n, k))
            lst = [(int(v), float(np.float32(w)))
                   for v, w in zip(targets, rng.choice([0.5, 1.0, 3.25], targets.size))]
            for v, _ in lst:
                g.add_vertex(v)
                ref.add_vertex(v)
            got, want = g.add_edges(u, lst), ref.add_edges(u, lst)
            budget -= want
            if got != want:
                return False
        elif op == 2:
            targets = np.unique(rng.integers(0, n, int(rng.integers(0, 16))))
            lst = [(int(v), 1.0) for v in targets]
            if g.remove_edges(u, lst) != ref.remove_edges(u, lst):
                return False
        else:
            g.update()
    g.update()
    return g.snapshot() == ref.snapshot()


def test_criterion_3_digraph_oracle(report):
    _random_sequence(np.random.default_rng(0), DiGraph(), GraphOracle())
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    failed = sum(not _random_sequence(rng, DiGraph(), GraphOracle()) for _ in range(1000))
    secs = time.perf_counter() - t0
    ok = failed == 0 and secs < 60
    report(3, ok, f"1000 sequences, {failed} mismatched, {secs:.1f}s")
    assert ok


def _random_pair(rng):
    n = int(rng.integers(1, 129))
    m = int(rng.integers(0, min(n * n, 1024) + 1))
    flat = rng.choice(n * n, m, replace=False)
    g = DiGraph.from_edges(flat // n, flat % n, rng.random(m).astype(np.float32), n=0)
    for u in rng.integers(0, n, 3):
        g.add_vertex(int(u))
    g.update(True, True)
    k = int(rng.integers(0, 128))
    top = n + int(rng.integers(0, 8))
    b = edge_batch(rng.integers(0, top, k), rng.integers(0, top, k),
                   rng.random(k).astype(np.float32))
    return n, g, b, flat


def _check_pair(rng):
    n, g, batch, flat = _random_pair(rng)
    before = g.snapshot()
    h, d = subtract_new(g, batch)
    c = clone_graph(g)
    if subtract_inplace(c, batch) != d or h.snapshot() != c.snapshot():
        return False
    h, d = add_new(g, batch)
    c = clone_graph(g)
    if add_inplace(c, batch) != d or h.snapshot() != c.snapshot():
        return False
    if g.snapshot() != before:
        return False
    # disjoint batch over fresh pairs, with its endpoints already present
    rest = np.setdiff1d(np.arange(n * n), flat)
    if rest.size:
        pick = rng.choice(rest, int(rng.integers(1, min(rest.size, 64) + 1)), replace=False)
        disjoint = edge_batch(pick // n, pick % n)
        for u in disjoint.vertices():
            g.add_vertex(int(u))
        g.update(True, True)
        before = g.snapshot()
        add_inplace(g, disjoint)
        subtract_inplace(g, disjoint)
        if g.snapshot() != before:
            return False
    return True


def test_criterion_4_batch_equivalences(report):
    _check_pair(np.random.default_rng(0))
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    failed = sum(not _check_pair(rng) for _ in range(500))
    secs = time.perf_counter() - t0
    ok = failed == 0 and secs < 60
    report(4, ok, f"500 pairs, {failed} mismatched, {secs:.1f}s")
    assert ok


def test_criterion_5_reverse_walk(report):
    chain = DiGraph.from_edges([0, 1], [1, 2])
    reverse_walk(chain, 1)
    t0 = time.perf_counter()
    ok_chain = (reverse_walk(chain, 1).tolist() == [1, 1, 0]
                and reverse_walk(chain, 2).tolist() == [1, 0, 0])
    rng = np.random.default_rng(5)
    failed = 0
    for _ in range(200):
        n = int(rng.integers(1, 65))
        edges = random_simple_edges(rng, n, int(rng.integers(0, 3 * n + 1)))
        g = DiGraph.from_edges([u for u, _ in edges], [v for _, v in edges], n=n)
        for u in range(n):
            g.add_vertex(u)
        for k in range(9):
            if reverse_walk(g, k).tolist() != walk_oracle(n, edges, k):
                failed += 1
    secs = time.perf_counter() - t0
    ok = ok_chain and failed == 0 and secs < 30
    report(5, ok, f"chain={'ok' if ok_chain else 'wrong'}, 200 graphs x k=0..8, "
                  f"{failed} mismatched, {secs:.1f}s")
    assert ok


def test_criterion_6_allocator_stress(report):
    t0 = time.perf_counter()
    results = []
    for threads in (4, 8):
        a = ConcurrentArena()
        with using_threads(threads):
            ops, corrupt, overlap = run_stress(a, 1 << 18, threads, 4)
        a.reset()
        results.append((threads, ops, corrupt, overlap, a.pool_count))
    secs = time.perf_counter() - t0
    ok = (all(ops >= 1 << 20 and c == 0 and o == 0 and p == 0 for _, ops, c, o, p in results)
          and secs < 60)
    detail = ", ".join(f"T={t}: {ops} ops corrupt={c} overlap={o} pools_after_reset={p}"
                       for t, ops, c, o, p in results)
    report(6, ok, f"{detail}, {secs:.1f}s")
    assert ok


def test_criterion_7_allocator_speed(report):
    count, rounds, threads = 1 << 20, 8, 4
    time_workload("mixed", "cp2aa", 1 << 12, threads, 1)
    t0 = time.perf_counter()
    system = statistics.median(time_workload("mixed", "system", count, threads, rounds)
                               for _ in range(3))
    cp2aa = statistics.median(time_workload("mixed", "cp2aa", count, threads, rounds)
                              for _ in range(3))
    secs = time.perf_counter() - t0
    speedup = system / cp2aa
    ok = speedup >= 1.5 and secs < 120
    report(7, ok, f"mixed 2^20 x {rounds} rounds, {threads} threads: system {system:.3f}s, "
                  f"cp2aa {cp2aa:.3f}s, speedup {speedup:.2f}x, {secs:.1f}s")
    assert ok


def test_criterion_8_clone_split(report):
    run_suite(SuiteConfig("clone", "synth:1000,10000,1", repeats=1, threads=4))
    recs = run_suite(SuiteConfig("clone", "synth:100000,1000000,1", repeats=5, threads=4))
    means = {r.impl: r for r in recs if r.trial == "geomean"}
    dg, base = means["digraph"], means["baseline"]
    share = base.alloc_seconds / (base.alloc_seconds + base.copy_seconds)
    ok = (base.alloc_seconds is not None and base.copy_seconds is not None
          and dg.seconds < base.seconds)
    report(8, ok, f"1e6 edges: digraph {dg.seconds * 1e3:.2f}ms, baseline "
                  f"{base.seconds * 1e3:.2f}ms (alloc {base.alloc_seconds * 1e3:.2f}ms, "
                  f"copy {base.copy_seconds * 1e3:.2f}ms, alloc share {share:.0%})")
    assert ok


def test_criterion_9_delete_throughput(report):
    csr = synth_graph(100_000, 1_000_000, seed=3)
    base = clone_graph(csr)
    batch = generate_batch(base, BatchSpec("delete", 0.1, seed=1))
    times = {1: [], 4: []}

    def run(threads):
        g = clone_graph(base)
        with using_threads(threads):
            t0 = time.perf_counter()
            d = subtract_inplace(g, batch)
            secs = time.perf_counter() - t0
        g.close()
        return secs, d.dm

    for threads in (1, 4):
        run(threads)
    removed = set()
    for _ in range(15):
        for threads in (1, 4):
            secs, dm = run(threads)
            times[threads].append(secs)
            removed.add(dm)
    t1, t4 = statistics.median(times[1]), statistics.median(times[4])
    ok = removed == {batch.m} and t1 < 5 and t4 <= 1.1 * t1
    report(9, ok, f"delete {batch.m} of 1e6 edges: median T=1 {t1 * 1e3:.2f}ms, "
                  f"T=4 {t4 * 1e3:.2f}ms, ratio {t4 / t1:.2f}")
    assert ok
