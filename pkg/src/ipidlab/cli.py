"""Command-line interface: analysis sweeps, simulations, benchmarks,
trace tooling, and recommendations. All outputs are CSV.

Sweeps default to the lambda grid 2^-14 .. 2^20 (log2-spaced). When no
resource count is given, per-destination sweeps run at its two common
purge thresholds (2^12, 2^15) and per-bucket at its bucket-count bounds
(2^11, 2^18), labeled ``method:r=<count>``.
"""
from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import analytics, montecarlo
from .bench import BenchConfig, export_report, run_benchmark
from .recommend import RateEstimate, bandwidth_to_lambda, recommend
from .selectors import (
    DEFAULT_QUEUE_K,
    DEFAULT_SHUFFLE_K,
    METHOD_GLOBAL,
    METHOD_PER_BUCKET_EXCLUSIVE,
    METHOD_PER_BUCKET_RACY,
    METHOD_PER_CONNECTION,
    METHOD_PER_DESTINATION,
    METHOD_PRNG_PURE,
    METHOD_PRNG_QUEUE,
    METHOD_PRNG_SHUFFLE,
    METHODS,
    SelectorConfig,
)
from .trace import generate_trace, load_trace, save_trace

ANALYZE_HEADER = ["method", "lambda_log2", "value", "std_err"]

_BUCKET_METHODS = (METHOD_PER_BUCKET_EXCLUSIVE, METHOD_PER_BUCKET_RACY)
_PRNG_DEFAULT_K = {
    METHOD_PRNG_QUEUE: DEFAULT_QUEUE_K,
    METHOD_PRNG_SHUFFLE: DEFAULT_SHUFFLE_K,
    METHOD_PRNG_PURE: 0,
}
_DEFAULT_R = {
    METHOD_PER_DESTINATION: (1 << 12, 1 << 15),
    METHOD_PER_BUCKET_EXCLUSIVE: (1 << 11, 1 << 18),
    METHOD_PER_BUCKET_RACY: (1 << 11, 1 << 18),
}


class CliError(Exception):
    """Validation failure; printed as a one-line reason, exit code 2."""


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="RNG seed for all stochastic outputs")
    parser.add_argument("--out", default=None, help="output file path")
    parser.add_argument("--format", choices=["csv"], default="csv", help="output format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipidlab",
        description="Evaluate IPv4 ID selection methods: collision probability, "
        "guessability, contention benchmarks, and configuration advice.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="sweep collision or guess probability over lambda")
    p.add_argument(
        "--quantity",
        required=True,
        choices=["correctness", "security-uniform", "security-worst"],
    )
    p.add_argument(
        "--methods",
        nargs="+",
        default=list(METHODS),
        choices=list(METHODS),
        metavar="METHOD",
        help=f"methods to sweep (default: all of {', '.join(METHODS)})",
    )
    p.add_argument(
        "--lambda-log2",
        nargs=3,
        type=float,
        default=[-14.0, 20.0, 1.0],
        metavar=("START", "STOP", "STEP"),
        help="inclusive log2-lambda grid (default -14 20 1)",
    )
    p.add_argument("--g", type=int, default=1, help="adversary guess budget")
    p.add_argument("--k", type=int, default=None, help="reserved-IPID count override")
    p.add_argument("--r", type=int, default=None, help="resource count override")
    p.add_argument("--trials", type=int, default=100_000, help="Monte Carlo trials per point")
    p.add_argument("--t", type=int, default=3, help="ticks per unit time")
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bench", help="multi-worker IPID request benchmark")
    p.add_argument("--method", required=True, choices=list(METHODS))
    p.add_argument("--cpus", type=int, required=True, help="number of concurrent workers")
    p.add_argument("--duration", type=float, default=10.0, help="seconds per trial")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--trace", default=None, help="trace file (binary or .csv)")
    p.add_argument("--packets", type=int, default=100_000, help="generated trace size")
    p.add_argument("--flows", type=int, default=1024, help="generated trace flow count")
    p.add_argument("--skew", type=float, default=1.0, help="generated trace Zipf skew")
    p.add_argument("--atomic-fraction", type=float, default=0.824)
    p.add_argument("--r", type=int, default=None, help="bucket count (per-bucket methods)")
    p.add_argument("--k", type=int, default=None, help="reserved-IPID count (PRNG methods)")
    p.add_argument("--no-pin", action="store_true", help="do not pin workers to CPUs")
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", help="per-bucket stochastic-increment simulations")
    sim_sub = p.add_subparsers(dest="simulation", required=True)

    pc = sim_sub.add_parser("bucket-collision", help="conditional collision probability")
    pc.add_argument("--n", type=int, required=True, help="packets in transit")
    pc.add_argument("--lambda", dest="lam", type=float, required=True)
    pc.add_argument("--trials", type=int, default=100_000)
    pc.add_argument("--t", type=int, default=3)
    _add_common(pc)
    pc.set_defaults(func=cmd_simulate_collision)

    pd = sim_sub.add_parser("sum-dist", help="next-value distribution of a bucket counter")
    pd.add_argument("--lambda-i", dest="lam_i", type=float, required=True)
    pd.add_argument("--trials", type=int, default=100_000)
    pd.add_argument("--t", type=int, default=3)
    _add_common(pd)
    pd.set_defaults(func=cmd_simulate_sumdist)

    p = sub.add_parser("gen-trace", help="generate a synthetic packet trace")
    p.add_argument("--packets", type=int, required=True)
    p.add_argument("--flows", type=int, required=True)
    p.add_argument("--skew", type=float, default=1.0)
    p.add_argument("--atomic-fraction", type=float, default=0.824)
    _add_common(p)
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("trace", help="trace file utilities")
    trace_sub = p.add_subparsers(dest="trace_command", required=True)
    pt = trace_sub.add_parser("convert", help="convert between binary and CSV traces")
    pt.add_argument("--in", dest="in_path", required=True)
    pt.add_argument("--out", dest="out_path", required=True)
    pt.add_argument("--seed", type=int, default=0, help=argparse.SUPPRESS)
    pt.set_defaults(func=cmd_trace_convert)

    p = sub.add_parser("recommend", help="recommend a method configuration from rates")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="total rate per unit time")
    p.add_argument("--lambda-n", dest="lam_n", type=float, default=None, help="non-connection-bound rate")
    p.add_argument("--bandwidth-bps", type=float, default=None, help="total bandwidth in bits/s")
    p.add_argument("--cb-fraction", type=float, default=None, help="fraction of traffic that is connection-bound")
    p.add_argument("--unit-time-s", type=float, default=0.01)
    p.add_argument("--packet-bytes", type=int, default=1500)
    p.set_defaults(func=cmd_recommend)

    return parser


def _out_or_default(args, default_name: str) -> str:
    return args.out if args.out else default_name


def _lambda_grid(args) -> np.ndarray:
    start, stop, step = args.lambda_log2
    if not start < stop:
        raise CliError(f"--lambda-log2: start ({start}) must be < stop ({stop})")
    if step <= 0:
        raise CliError(f"--lambda-log2: step must be positive, got {step}")
    return np.arange(start, stop + step * 0.5, step)


def _method_k(method: str, override) -> int:
    if override is not None:
        return override
    return _PRNG_DEFAULT_K[method]


def _method_r_values(method: str, override) -> list[int]:
    if override is not None:
        return [override]
    return list(_DEFAULT_R[method])


def _correctness_rows(args, exps) -> list[list]:
    rows = []
    for method in args.methods:
        if method in (METHOD_GLOBAL, METHOD_PER_CONNECTION, METHOD_PER_DESTINATION):
            for e in exps:
                value = analytics.collision_prob_counter(2.0**e)
                rows.append([method, e, value, ""])
        elif method in _BUCKET_METHODS:
            for i, e in enumerate(exps):
                sim = montecarlo.SimParams(trials=args.trials, t=args.t, seed=args.seed + i)
                value, se = montecarlo.collision_prob_bucket(2.0**e, sim)
                rows.append([method, e, value, se])
        else:
            k = _method_k(method, args.k)
            for e in exps:
                value = analytics.collision_prob_prng(2.0**e, k)
                rows.append([method, e, value, ""])
    return rows


def _security_rows(args, exps, worst: bool) -> list[list]:
    g = args.g
    rows = []
    for method in args.methods:
        if method == METHOD_GLOBAL:
            for e in exps:
                res = analytics.guess_prob_counter(2.0**e, g)
                rows.append([method, e, res.probability, ""])
        elif method == METHOD_PER_CONNECTION:
            value = analytics.guess_prob_per_connection(g)
            for e in exps:
                rows.append([method, e, value, ""])
        elif method in (METHOD_PRNG_QUEUE, METHOD_PRNG_SHUFFLE, METHOD_PRNG_PURE):
            value = analytics.guess_prob_prng(g, _method_k(method, args.k))
            for e in exps:
                rows.append([method, e, value, ""])
        elif method == METHOD_PER_DESTINATION:
            for r in _method_r_values(method, args.r):
                label = method if args.r is not None else f"{method}:r={r}"
                for e in exps:
                    lam = 2.0**e
                    if worst:
                        _, value = analytics.worst_case_lambda_i(method, lam, r, g)
                    else:
                        value = analytics.guess_prob_counter(lam / r, g).probability
                    rows.append([label, e, value, ""])
        else:  # per-bucket variants
            for r in _method_r_values(method, args.r):
                label = method if args.r is not None else f"{method}:r={r}"
                for i, e in enumerate(exps):
                    lam = 2.0**e
                    sim = montecarlo.SimParams(trials=args.trials, t=args.t, seed=args.seed + i)
                    if worst:
                        _, value = analytics.worst_case_lambda_i(method, lam, r, g, sim=sim)
                        rows.append([label, e, value, ""])
                    else:
                        res = analytics.guess_prob_bucket(lam / r, g, sim)
                        rows.append([label, e, res.probability, res.std_err])
    return rows


def cmd_analyze(args) -> int:
    exps = _lambda_grid(args)
    if args.g is not None and not 1 <= args.g <= 1 << 16:
        raise CliError(f"--g must be in [1, 65536], got {args.g}")
    if args.quantity == "correctness":
        rows = _correctness_rows(args, exps)
    else:
        rows = _security_rows(args, exps, worst=args.quantity == "security-worst")
    out = _out_or_default(args, f"analyze-{args.quantity}.csv")
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ANALYZE_HEADER)
        for method, e, value, se in rows:
            writer.writerow([method, repr(float(e)), repr(float(value)), "" if se == "" else repr(float(se))])
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_bench(args) -> int:
    if args.cpus < 1:
        raise CliError(f"--cpus must be >= 1, got {args.cpus}")
    if args.duration <= 0:
        raise CliError(f"--duration must be positive, got {args.duration}")
    if args.trace:
        trace = load_trace(args.trace)
    else:
        trace = generate_trace(
            n_packets=args.packets,
            n_flows=args.flows,
            skew=args.skew,
            atomic_fraction=args.atomic_fraction,
            seed=args.seed,
        )
    sel = SelectorConfig(method=args.method, seed=args.seed)
    if args.r is not None:
        sel.r = args.r
    if args.k is not None:
        sel.k = args.k
    config = BenchConfig(
        selector=sel,
        workers=args.cpus,
        duration_s=args.duration,
        trials=args.trials,
        pin_cpus=not args.no_pin,
    )
    report = run_benchmark(config, trace)
    out = _out_or_default(args, f"bench-{args.method}-c{args.cpus}.csv")
    export_report(report, out)
    print(
        f"{args.method}: {report.mean_throughput:.0f} IPIDs/s mean over "
        f"{args.trials} trials ({report.mean_request_ns:.0f} ns/request); wrote {out}"
    )
    return 0


def cmd_simulate_collision(args) -> int:
    sim = montecarlo.SimParams(trials=args.trials, t=args.t, seed=args.seed)
    prob, se = montecarlo.conditional_collision_bucket(args.n, args.lam, sim)
    out = _out_or_default(args, "bucket-collision.csv")
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "lambda", "trials", "probability", "std_err"])
        writer.writerow([args.n, repr(args.lam), args.trials, repr(prob), repr(se)])
    print(f"collision probability {prob!r} (std err {se!r}); wrote {out}")
    return 0


def cmd_simulate_sumdist(args) -> int:
    sim = montecarlo.SimParams(trials=args.trials, t=args.t, seed=args.seed)
    table = montecarlo.increment_sum_distribution(args.lam_i, sim)
    out = _out_or_default(args, "sum-dist.csv")
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ipid", "mass"])
        for ipid, mass in enumerate(table.mass):
            writer.writerow([ipid, repr(float(mass))])
    print(f"wrote next-value distribution to {out}")
    return 0


def cmd_gen_trace(args) -> int:
    trace = generate_trace(
        n_packets=args.packets,
        n_flows=args.flows,
        skew=args.skew,
        atomic_fraction=args.atomic_fraction,
        seed=args.seed,
    )
    out = _out_or_default(args, "trace.bin")
    save_trace(trace, out)
    print(f"wrote {len(trace)} records to {out}")
    return 0


def cmd_trace_convert(args) -> int:
    trace = load_trace(args.in_path)
    save_trace(trace, args.out_path)
    print(f"converted {len(trace)} records: {args.in_path} -> {args.out_path}")
    return 0


def cmd_recommend(args) -> int:
    by_rate = args.lam is not None or args.lam_n is not None
    by_bandwidth = args.bandwidth_bps is not None or args.cb_fraction is not None
    if by_rate == by_bandwidth:
        raise CliError(
            "provide exactly one input form: --lambda/--lambda-n or "
            "--bandwidth-bps/--cb-fraction"
        )
    if by_rate:
        if args.lam is None or args.lam_n is None:
            raise CliError("--lambda and --lambda-n are both required")
        lam, lam_n = args.lam, args.lam_n
    else:
        if args.bandwidth_bps is None or args.cb_fraction is None:
            raise CliError("--bandwidth-bps and --cb-fraction are both required")
        if not 0.0 <= args.cb_fraction <= 1.0:
            raise CliError(f"--cb-fraction must be in [0, 1], got {args.cb_fraction}")
        lam = bandwidth_to_lambda(
            args.bandwidth_bps, unit_time_s=args.unit_time_s, packet_bytes=args.packet_bytes
        )
        lam_n = lam * (1.0 - args.cb_fraction)

    try:
        rates = RateEstimate.from_total(lam, lam_n)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    rec = recommend(rates)
    print(f"use case {rec.use_case}: {rec.label}")
    print(f"  rates: lambda={lam!r}, lambda_n={lam_n!r}, lambda_c={rates.lam_c!r}")
    print(f"  non-connection-bound method: {rec.non_cb_method}")
    print(f"  connection-bound handling:   {rec.cb_handling}")
    print(f"  rationale: {rec.rationale}")
    print(f"RECOMMEND {rec.use_case} {rec.non_cb_method} {rec.cb_handling}")
    return 0


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
