"""Command-line entry point for the benchmark suite.

Arguments are parsed before numba is imported so the requested thread count
can size numba's worker pool.
"""
import argparse
import os
import sys

THREADS_ENV = "DYNGRAPH_THREADS"
WORKLOADS = ("load", "clone", "delete", "delete-new", "insert", "insert-new", "walk",
             "alloc-alloc", "alloc-free", "alloc-mixed")
EXIT_USAGE = 1
EXIT_INPUT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_fractions(text):
    """``"1e-7..1e-1"`` expands by decades; otherwise a comma-separated list."""
    try:
        if ".." in text:
            lo, hi = (float(x) for x in text.split(".."))
            out = []
            x = lo
            while x <= hi * (1 + 1e-9):
                out.append(float(f"{x:.12g}"))
                x *= 10
        else:
            out = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad fraction list {text!r}") from None
    if not out or any(not 0 < f <= 0.1 for f in out):
        raise argparse.ArgumentTypeError("fractions must lie in (0, 0.1]")
    return tuple(out)


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _count(text):
    try:
        return _positive(str(int(float(text)))) if "e" in text.lower() else _positive(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a count, got {text!r}") from None


def build_parser():
    p = _Parser(prog="dyngraph-bench", description="Time dynamic graph workloads; writes CSV.")
    p.add_argument("--workload", required=True, choices=WORKLOADS)
    p.add_argument("--graph", help="path to an .mtx file or synth:n,m,seed")
    p.add_argument("--fractions", type=parse_fractions, default=parse_fractions("1e-7..1e-1"),
                   help="batch sizes as fractions of |E| (default 1e-7..1e-1)")
    p.add_argument("--repeats", type=_positive, default=5)
    p.add_argument("--threads", type=_positive,
                   help=f"worker threads (default: ${THREADS_ENV} or all cores)")
    p.add_argument("--steps", type=int, default=42, help="reverse-walk length")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--rho", type=_positive, default=4, help="loader partitions")
    p.add_argument("--beta", type=_positive, default=256 * 1024, help="loader block bytes")
    p.add_argument("--count", type=_count, default=1 << 20, help="allocator operations")
    p.add_argument("--rounds", type=_positive, default=8, help="mixed allocator rounds")
    p.add_argument("--no-verify", dest="verify", action="store_false",
                   help="skip checking batch results against a set oracle")
    p.add_argument("--out", default="-", help="CSV path (default stdout)")
    return p


def resolve_threads(args, parser):
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return _positive(env)
        except argparse.ArgumentTypeError as e:
            parser.error(f"{THREADS_ENV}: {e}")
    return os.cpu_count() or 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.workload.startswith("alloc-") and not args.graph:
        parser.error(f"--graph is required for workload {args.workload}")
    if args.steps < 0:
        parser.error("--steps must be non-negative")
    threads = resolve_threads(args, parser)
    if "numba" not in sys.modules:
        pool = int(os.environ.get("NUMBA_NUM_THREADS", "0") or 0)
        os.environ["NUMBA_NUM_THREADS"] = str(max(pool, threads))
    import numba

    if threads > numba.config.NUMBA_NUM_THREADS:
        parser.error(f"--threads {threads} exceeds the worker pool "
                     f"({numba.config.NUMBA_NUM_THREADS})")

    from ..mtx import MtxError
    from .runner import SuiteConfig, VerificationError, run_suite, write_csv

    cfg = SuiteConfig(workload=args.workload, graph=args.graph, fractions=args.fractions,
                      repeats=args.repeats, threads=threads, steps=args.steps, seed=args.seed,
                      rho=args.rho, beta=args.beta, count=args.count, rounds=args.rounds,
                      verify=args.verify)
    try:
        records = run_suite(cfg)
    except (OSError, MtxError, ValueError) as e:
        print(f"dyngraph-bench: input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except VerificationError as e:
        print(f"dyngraph-bench: verification failed: {e}", file=sys.stderr)
        return EXIT_INPUT
    if args.out == "-":
        write_csv(records, sys.stdout)
    else:
        with open(args.out, "w", newline="") as f:
            write_csv(records, f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
