"""Command-line front end.

Exit codes: 0 success, 1 failed uniformity verdict, 2 invalid input or
configuration, 3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import secrets
import sys
import time

import numpy as np

from .chain import DEFAULT_PL
from .edgeset import MAX_THREADS
from .errors import EdgeSwitchError, InvariantViolation
from .graph import degree_sequence_of, gen_gnp, havel_hakimi, read_edge_list, sample_pld_degrees, write_edge_list
from .mixing import DEFAULT_SCHEDULE, REPORT_FIELDS, ThinningSchedule, compare_chains, pld_instance
from .parallel import ALGORITHMS, default_threads, make_chain
from .report import write_rows
from .rng import RandomStream
from .verify import chi_square_uniformity, enumerate_graphs, histogram_rows, sample_distribution

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2, 3

RECORD_FIELDS = ("superstep", "accepted", "rejected_loop", "rejected_existing", "rounds", "seconds")
BENCH_FIELDS = ("algo", "threads", "repetition", "phase", "seconds", "supersteps", "rounds_mean", "rounds_max")


class UsageError(EdgeSwitchError, ValueError):
    pass


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(64)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _check_common(args):
    threads = getattr(args, "threads", None)
    if threads is not None and not 1 <= threads <= MAX_THREADS:
        raise UsageError(f"--threads must lie in [1, {MAX_THREADS}]")
    pl = getattr(args, "pl", None)
    if pl is not None and not 0.0 < pl < 1.0:
        raise UsageError("--pl must lie in (0, 1)")
    steps = getattr(args, "supersteps", None)
    if steps is not None and steps < 0:
        raise UsageError("--supersteps must be non-negative")


def cmd_gen(args) -> int:
    stream = RandomStream(_seed(args))
    if args.kind == "gnp":
        if args.n < 0 or not 0.0 <= args.p <= 1.0:
            raise UsageError("gnp needs n >= 0 and 0 <= p <= 1")
        g = gen_gnp(args.n, args.p, stream)
    else:
        if args.n < 1 or args.gamma <= 1.0:
            raise UsageError("pld needs n >= 1 and gamma > 1")
        g = havel_hakimi(sample_pld_degrees(args.n, args.gamma, stream))
    write_edge_list(args.out, g)
    deg = degree_sequence_of(g)
    print(f"n={g.n} m={g.m} max_degree={int(deg.max()) if len(deg) else 0}")
    return EXIT_OK


def _run_chain(args, g):
    chain = make_chain(args.algo, g, seed=args.seed, threads=args.threads, p_l=args.pl)
    try:
        t0 = time.perf_counter()
        for _ in range(args.supersteps):
            chain.superstep()
        return chain, time.perf_counter() - t0
    finally:
        chain.close()


def cmd_randomize(args) -> int:
    _check_common(args)
    _seed(args)
    g = read_edge_list(args.input, sanitize=args.sanitize)
    degrees = degree_sequence_of(g)
    chain, seconds = _run_chain(args, g)
    out = chain.edge_list()
    if not out.is_simple() or not np.array_equal(degree_sequence_of(out), degrees):
        raise InvariantViolation("randomized graph lost simplicity or its degree sequence")
    write_edge_list(args.output, out.sorted() if args.sort_output else out)
    rows = [r.row() for r in chain.records]
    for r in rows:
        extra = f" rounds={r['rounds']}" if r["rounds"] is not None else ""
        print(f"superstep {r['superstep']}: accepted={r['accepted']} loop={r['rejected_loop']} "
              f"existing={r['rejected_existing']}{extra} seconds={r['seconds']:.4f}")
    print(f"algo={args.algo} threads={args.threads} supersteps={args.supersteps} wall_seconds={seconds:.4f}")
    if args.report:
        write_rows(args.report, rows, RECORD_FIELDS)
    return EXIT_OK


def cmd_bench(args) -> int:
    _check_common(args)
    _seed(args)
    g = read_edge_list(args.input, sanitize=args.sanitize)
    rows = []
    for rep in range(args.repetitions):
        t0 = time.perf_counter()
        chain = make_chain(args.algo, g, seed=args.seed + rep, threads=args.threads, p_l=args.pl)
        init = time.perf_counter() - t0
        try:
            t0 = time.perf_counter()
            for _ in range(args.supersteps):
                chain.superstep()
            run = time.perf_counter() - t0
        finally:
            chain.close()
        rounds = [r.rounds for r in chain.records if r.rounds is not None]
        rmean = float(np.mean(rounds)) if rounds else None
        rmax = int(max(rounds)) if rounds else None
        base = {"algo": args.algo, "threads": args.threads, "repetition": rep}
        rows.append({**base, "phase": "init", "seconds": init, "supersteps": 0})
        rows.append({**base, "phase": "supersteps", "seconds": run, "supersteps": args.supersteps,
                     "rounds_mean": rmean, "rounds_max": rmax})
    for r in rows:
        print(",".join("" if r.get(f) is None else str(r.get(f)) for f in BENCH_FIELDS))
    if args.out:
        write_rows(args.out, rows, BENCH_FIELDS)
    return EXIT_OK


def cmd_analyze_mixing(args) -> int:
    _check_common(args)
    seed = _seed(args)
    schedule = ThinningSchedule.parse(args.schedule) if args.schedule else ThinningSchedule(DEFAULT_SCHEDULE)
    if args.input:
        instance = read_edge_list(args.input, sanitize=args.sanitize)
    else:
        instance = pld_instance(args.n, args.gamma)
    algos = ("es", "global-es") if args.algo == "both" else (args.algo,)
    reports = compare_chains(instance, args.runs, args.supersteps, schedule, seed, algos, args.pl, args.track_all)
    rows = []
    for algo, rep in reports.items():
        for r in rep.rows:
            rows.append({"algo": algo, **r})
            print(f"{algo} k={r['k']} fraction={r['mean_fraction_non_independent']:.4f} "
                  f"stddev={r['stddev']:.4f}")
    if args.out:
        if len(algos) == 1:
            reports[algos[0]].write_csv(args.out)
        else:
            write_rows(args.out, rows, ("algo",) + REPORT_FIELDS)
    return EXIT_OK


def cmd_verify_uniformity(args) -> int:
    _check_common(args)
    seed = _seed(args)
    d = [int(x) for x in args.degrees.split(",") if x.strip()]
    space = enumerate_graphs(d)
    if not len(space):
        raise UsageError(f"degree sequence {tuple(d)} is not graphical")
    hist = sample_distribution(args.algo, d, args.supersteps, args.samples, seed, args.threads, args.pl,
                               space=space)
    res = chi_square_uniformity(hist, space, args.alpha)
    verdict = "PASS" if res.passed else "FAIL"
    print(f"{verdict}: states={len(space)} samples={args.samples} chi2={res.statistic:.3f} "
          f"dof={res.dof} critical={res.critical:.3f} alpha={args.alpha}")
    if args.histogram:
        write_rows(args.histogram, histogram_rows(hist, space), ("state", "count"))
    return EXIT_OK if res.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgeswitch", description="Degree-preserving graph randomization")
    sub = p.add_subparsers(dest="command", required=True)

    def chain_opts(sp, algo_default="steady-global-es", algos=ALGORITHMS):
        sp.add_argument("--algo", choices=algos, default=algo_default)
        sp.add_argument("--supersteps", type=int, default=20)
        sp.add_argument("--threads", type=int, default=default_threads())
        sp.add_argument("--pl", type=float, default=DEFAULT_PL, help="lazy-step probability P_L")
        sp.add_argument("--seed", type=int)

    g = sub.add_parser("gen", help="generate a G(n,p) or power-law graph")
    g.add_argument("kind", choices=("gnp", "pld"))
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--p", type=float, default=0.01)
    g.add_argument("--gamma", type=float, default=2.5)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("randomize", help="randomize an edge list")
    r.add_argument("input")
    r.add_argument("output")
    chain_opts(r)
    r.add_argument("--sanitize", action="store_true", help="drop loops and duplicate edges on input")
    r.add_argument("--sort-output", action="store_true")
    r.add_argument("--report", help="per-superstep CSV")
    r.set_defaults(func=cmd_randomize)

    b = sub.add_parser("bench", help="time initialization and supersteps")
    b.add_argument("input")
    chain_opts(b)
    b.add_argument("--repetitions", type=int, default=3)
    b.add_argument("--sanitize", action="store_true")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    m = sub.add_parser("analyze-mixing", help="fraction of non-independent edges per thinning value")
    m.add_argument("--algo", choices=("es", "global-es", "both"), default="both")
    m.add_argument("--supersteps", type=int, default=2000)
    m.add_argument("--schedule", help="comma-separated thinning values")
    m.add_argument("--runs", type=int, default=20)
    m.add_argument("--seed", type=int)
    m.add_argument("--pl", type=float, default=DEFAULT_PL)
    m.add_argument("--input", help="edge list; default is a fresh power-law graph per run")
    m.add_argument("--sanitize", action="store_true")
    m.add_argument("--n", type=int, default=128)
    m.add_argument("--gamma", type=float, default=2.5)
    m.add_argument("--track-all", action="store_true", help="track every node pair (n <= 512)")
    m.add_argument("--out")
    m.set_defaults(func=cmd_analyze_mixing)

    v = sub.add_parser("verify-uniformity", help="chi-square test of sampled states on a tiny sequence")
    v.add_argument("--degrees", required=True)
    chain_opts(v)
    v.set_defaults(threads=1)
    v.add_argument("--samples", type=int, default=120000)
    v.add_argument("--alpha", type=float, default=0.001)
    v.add_argument("--histogram", help="CSV of per-state counts")
    v.set_defaults(func=cmd_verify_uniformity)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"error: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (EdgeSwitchError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
