"""Batch front-end.

    secpmsim run        run workloads/modes (comma lists sweep), write CSVs
    secpmsim crashcheck exhaustive/random/targeted crash injection

Exit status: 0 ok, 1 consistency violation, 2 usage error.
Precedence: flags > config file > defaults.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import sys
from pathlib import Path

from secpmsim import workloads
from secpmsim.config import MODES, WORKLOADS, Config, apply_setting, parse_config
from secpmsim.crash import (
    AtomicWriteScenario,
    CrashPlan,
    ReencryptScenario,
    TxnScenario,
    Verdict,
    inject,
)
from secpmsim.runner import run_experiment
from secpmsim.stats import emit_normalized_report, emit_report

# Modes that promise crash consistency; inconsistencies elsewhere are the
# expected behavior of the broken baseline.
CONSISTENT_MODES = {"unsec-pm", "secpm-no-cwr", "secpm"}


class UsageError(Exception):
    pass


def _parse_list(value: str, cast=int) -> list:
    return [cast(part.strip()) for part in value.split(",") if part.strip()]


def _base_config(args: argparse.Namespace) -> Config:
    cfg = Config()
    if args.config:
        cfg = parse_config(Path(args.config).read_text(), base=cfg)
    for key in ("txn_count", "cache_ways", "seed", "log_slots"):
        value = getattr(args, key, None)
        if value is not None:
            apply_setting(cfg, key, str(value))
    return cfg


def _sweep_cells(args: argparse.Namespace, base: Config) -> list[Config]:
    modes = _parse_list(args.mode, str) if args.mode else [base.mode]
    kinds = _parse_list(args.workload, str) if args.workload else [base.workload]
    sizes = _parse_list(args.txn_size) if args.txn_size else [base.txn_size]
    qlens = _parse_list(args.queue_len) if args.queue_len else [base.queue_len]
    csizes = _parse_list(args.cache_size) if args.cache_size else [base.cache_size]
    cores = _parse_list(args.cores) if args.cores else [base.cores]
    for mode in modes:
        if mode not in MODES:
            raise UsageError(f"unknown mode {mode!r}")
    for kind in kinds:
        if kind not in WORKLOADS:
            raise UsageError(f"unknown workload {kind!r}")
    cells = []
    for mode in modes:
        for kind in kinds:
            for size in sizes:
                for qlen in qlens:
                    for csize in csizes:
                        for ncores in cores:
                            cells.append(dataclasses.replace(
                                base, mode=mode, workload=kind, txn_size=size,
                                queue_len=qlen, cache_size=csize, cores=ncores,
                            ))
    return cells


def cmd_run(args: argparse.Namespace) -> int:
    base = _base_config(args)
    cells = _sweep_cells(args, base)

    streams = None
    if args.trace_in:
        with open(args.trace_in) as fh:
            streams = [workloads.import_trace(fh, seed=base.seed,
                                              log_slots=base.log_slots)]
        if any(cfg.cores != 1 for cfg in cells):
            raise UsageError("--trace-in supports single-core runs only")

    all_stats = []
    for cfg in cells:
        cfg.validate()
        all_stats.append(run_experiment(cfg, streams))

    if args.trace_out:
        spec = workloads.WorkloadSpec.from_config(cells[0])
        with open(args.trace_out, "w") as fh:
            workloads.export_trace(workloads.generate(spec), fh)

    report = emit_report(all_stats)
    out = Path(args.out) if args.out else None
    if out:
        out.write_text(report)
        normalized = emit_normalized_report(all_stats)
        if normalized.count("\n") > 1:
            out.with_name(out.stem + "_normalized" + out.suffix).write_text(
                normalized)
    else:
        sys.stdout.write(report)
    return 0


def _parse_plan(text: str) -> CrashPlan:
    if text == "exhaustive":
        return CrashPlan("exhaustive")
    if text.startswith("random:"):
        return CrashPlan("random", count=int(text.split(":", 1)[1]))
    if text.startswith("at:"):
        return CrashPlan("at", at=int(text.split(":", 1)[1]))
    raise UsageError(f"bad crash plan {text!r} (exhaustive|random:N|at:K)")


def cmd_crashcheck(args: argparse.Namespace) -> int:
    base = _base_config(args)
    if args.mode:
        base.mode = args.mode
    if args.workload:
        base.workload = args.workload
    if args.txn_size:
        base.txn_size = int(args.txn_size)
    base.validate()
    plan = _parse_plan(args.crash)
    plan.seed = base.seed

    if args.scope == "txn":
        n_lines = min(base.txn_size // 64, 64)
        factory = lambda: TxnScenario(base, n_lines=n_lines)
    elif args.scope == "atomic-write":
        factory = lambda: AtomicWriteScenario(base)
    elif args.scope == "reencrypt":
        factory = lambda: ReencryptScenario(base)
    else:
        raise UsageError(f"unknown crash scope {args.scope!r}")

    outcomes = inject(plan, factory)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["crash_point", "event", "stage", "verdict",
                     "failing_address", "flag"])
    promised = base.mode in CONSISTENT_MODES
    bad = 0
    for o in outcomes:
        flag = ""
        if o.verdict is Verdict.INCONSISTENT:
            if promised:
                bad += 1
                flag = "VIOLATION"
            else:
                flag = "EXPECTED"
        writer.writerow([
            o.crash_point, o.label, o.stage, o.verdict.value,
            "" if o.failing_address is None else f"{o.failing_address:#x}",
            flag,
        ])
    report = buf.getvalue()
    if args.out:
        Path(args.out).write_text(report)
    else:
        sys.stdout.write(report)
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="secpmsim",
        description="encrypted persistent memory simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--mode", help=f"one of {', '.join(MODES)} (comma list)")
        p.add_argument("--workload",
                       help=f"one of {', '.join(WORKLOADS)} (comma list)")
        p.add_argument("--txn-size", dest="txn_size",
                       help="transaction size in bytes (comma list)")
        p.add_argument("--txn-count", dest="txn_count", type=int)
        p.add_argument("--queue-len", dest="queue_len",
                       help="write queue entries (comma list)")
        p.add_argument("--cache-size", dest="cache_size",
                       help="counter cache bytes (comma list)")
        p.add_argument("--cores", help="requester count (comma list)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="CSV output path (default stdout)")

    run_p = sub.add_parser("run", help="run workloads and emit stats CSV")
    common(run_p)
    run_p.add_argument("--trace-in", dest="trace_in")
    run_p.add_argument("--trace-out", dest="trace_out")
    run_p.set_defaults(func=cmd_run)

    crash_p = sub.add_parser("crashcheck", help="crash injection + recovery")
    common(crash_p)
    crash_p.add_argument("--crash", default="exhaustive",
                         help="exhaustive | random:N | at:K")
    crash_p.add_argument("--scope", default="txn",
                         choices=["txn", "atomic-write", "reencrypt"])
    crash_p.set_defaults(func=cmd_crashcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
