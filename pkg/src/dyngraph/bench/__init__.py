"""Benchmark harness: batch generation, baseline graph, timed workloads and CLI."""
