"""``signmuon`` command line: train, costmodel, verify.

Exit codes: 0 success, 1 runtime or verification failure, 2 bad config or flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import costmodel
from .config import ConfigError, load_config
from .harness import ExperimentAborted, run_experiment
from .verify import SUITES, timed_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

COST_COLUMNS = ("collective", "topology", "M", "d", "bits", "payload_bytes", "rounds",
                "latency_s", "bandwidth_s", "total_s", "send_bytes", "recv_bytes", "server_bytes")


def _write_trace(out_dir: Path, trace) -> None:
    (out_dir / "trace.jsonl").write_text(trace.to_jsonl())
    (out_dir / "trace.csv").write_text(trace.to_csv())


def cmd_train(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out) if args.out else cfg.out_dir
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.toml").write_text(cfg.echo())
    except OSError as exc:
        print(f"error: cannot write to {out_dir}: {exc}", file=sys.stderr)
        return EXIT_FAIL

    try:
        trace = run_experiment(cfg.task, cfg.noise, cfg.optimizer, cfg.M, cfg.path, cfg.T,
                               cfg.hp, jobs=cfg.jobs)
    except ExperimentAborted as exc:
        _write_trace(out_dir, exc.trace)
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL

    _write_trace(out_dir, trace)
    summary = {
        "name": cfg.name,
        "records": len(trace),
        "final_loss": trace.meta["final_loss"],
        "G_T": trace.meta["G_T"],
        "total_bytes_sent": float(sum(r.bytes_sent for r in trace.records)),
        "total_bytes_recv": float(sum(r.bytes_recv for r in trace.records)),
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _cost_row(sc: costmodel.AlphaBetaScenario) -> list:
    b = costmodel.iter_time(sc)
    return [sc.collective, sc.topology, sc.M, sc.d, sc.bits, b.payload_bytes, b.rounds,
            f"{b.latency_seconds:.6g}", f"{b.bandwidth_seconds:.6g}", f"{b.total_seconds:.6g}",
            f"{b.per_worker_send_bytes:.10g}", f"{b.per_worker_recv_bytes:.10g}",
            f"{b.server_bytes:.10g}"]


def _ag_vs_ar(args, lo: int, hi: int) -> int:
    if lo < 2:
        print("error: --ag-vs-ar needs M >= 2", file=sys.stderr)
        return EXIT_CONFIG
    print("M\tratio\tallgather_1bit_bytes\tallreduce_int8_bytes\tcrossover")
    be = costmodel.break_even_workers(args.d, ceil=args.ceil)
    for M in range(lo, hi + 1):
        ratio = costmodel.ag_over_ar_bandwidth_ratio(M, args.d, ceil=args.ceil)
        ag = costmodel.volumes("allgather", M, costmodel.payload_bytes(args.d, 1))[0]
        ar = costmodel.volumes("allreduce", M, costmodel.payload_bytes(args.d, 8))[0]
        print(f"{M}\t{ratio:.10g}\t{ag:.10g}\t{ar:.10g}\t{'yes' if M == be else ''}")
    print(f"# break-even M = {be}")
    return EXIT_OK


def cmd_costmodel(args) -> int:
    if args.sweep_M is not None and args.M is not None:
        print("error: --M and --sweep-M are mutually exclusive", file=sys.stderr)
        return EXIT_CONFIG
    if args.ag_vs_ar and args.sweep_M is None:
        print("error: --ag-vs-ar needs --sweep-M", file=sys.stderr)
        return EXIT_CONFIG
    if args.sweep_M is not None:
        lo, hi = args.sweep_M
        if lo < 1 or hi < lo:
            print("error: --sweep-M needs 1 <= LO <= HI", file=sys.stderr)
            return EXIT_CONFIG
        Ms = range(lo, hi + 1)
    else:
        Ms = [args.M if args.M is not None else 16]
    if args.ag_vs_ar:
        return _ag_vs_ar(args, lo, hi)

    collectives = costmodel.COLLECTIVES if args.collective == "all" else (args.collective,)
    try:
        rows = [_cost_row(costmodel.AlphaBetaScenario(args.alpha, args.beta, M, args.d, b,
                                                      args.topology, c))
                for M in Ms for b in args.bits for c in collectives]
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("\t".join(COST_COLUMNS))
    for row in rows:
        print("\t".join(str(v) for v in row))
    return EXIT_OK


def cmd_verify(args) -> int:
    reports, elapsed = timed_suite(args.suite, args.seed, args.jobs)
    failed = [r for r in reports if not r.passed]
    for r in reports:
        print(r.line())
    print(f"# {len(reports)} checks, {len(failed)} failed, {elapsed:.1f} s")
    for r in failed:
        print(f"failing: {r.name} measured={r.measured:.6g} bound={r.bound:.6g}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signmuon", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one experiment from a TOML config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("costmodel", help="alpha-beta cost table as TSV")
    p.add_argument("--alpha", type=float, default=5e-6, help="per-message latency in seconds")
    p.add_argument("--beta", type=float, default=1e-10, help="seconds per byte")
    p.add_argument("--M", type=int, help="number of workers (default 16)")
    p.add_argument("--d", type=int, required=True, help="entries in the sign vector")
    p.add_argument("--bits", type=int, nargs="+", default=[1, 8, 32], choices=costmodel.BITS)
    p.add_argument("--topology", choices=costmodel.TOPOLOGIES, default="ring")
    p.add_argument("--collective", choices=costmodel.COLLECTIVES + ("all",), default="all")
    p.add_argument("--sweep-M", type=int, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--ag-vs-ar", action="store_true",
                   help="with --sweep-M, print the 1-bit all-gather over int8 all-reduce ratio")
    p.add_argument("--ceil", action="store_true",
                   help="use whole-byte packed payloads in the ratio")
    p.set_defaults(func=cmd_costmodel)

    p = sub.add_parser("verify", help="run verification suites")
    p.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
