"""Command line: run scenarios, analyze dumps, render reports, compare runs.

Exit codes: 0 success, 2 configuration/usage error, 3 runtime failure
(bootstrap timeout, spawn failure, missing reply).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from planeprof.analysis.categories import CategoryRules, load_rules
from planeprof.analysis.hotspots import ScenarioMismatch, compare, find_hotspots
from planeprof.instrument.dumpio import Dump, DumpFormatError, read_dump
from planeprof.instrument.events import CodeSite, SiteKind
from planeprof.instrument.proctimes import CoarseBreakdown
from planeprof.instrument.recorder import Recorder, calibrate_clocks
from planeprof.model.aggregate import (
    UnknownScope,
    aggregate_regions,
    aggregate_threads,
    profile_from_dump,
)
from planeprof.model.merge import RunIdMismatch, merge_profiles
from planeprof.model.stats import FunctionProfile
from planeprof.reporting.exports import read_export, write_export
from planeprof.reporting.summary import render_summary, write_dump_index
from planeprof.reporting.tables import (
    InvalidSortKey,
    ReportFormat,
    ReportKind,
    ReportSpec,
    write_report,
)
from planeprof.testbed.config import ScenarioConfig, ScenarioError, load_scenario
from planeprof.testbed.orchestrator import (
    BootstrapTimeout,
    EntitySpawnFailed,
    NoActiveWorkflow,
    PortUnavailable,
    bootstrap,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

LEVELS = ("coarse", "function", "line", "thread", "sample")

SITE_RUN_WINDOW = CodeSite("cli.py", 1, "run_window", SiteKind.REGION)


class CliError(Exception):
    """Usage-level problem; maps to exit code 2."""


def _parse_levels(raw: Optional[str]) -> Tuple[str, ...]:
    if not raw:
        return ("coarse", "function", "line", "thread")
    levels = tuple(x.strip() for x in raw.split(",") if x.strip())
    unknown = [x for x in levels if x not in LEVELS]
    if unknown:
        raise CliError(f"unknown profiling levels: {unknown}; valid: {list(LEVELS)}")
    return levels


def _load_dumps(dump_dir: Path) -> List[Dump]:
    if not dump_dir.is_dir():
        candidate = dump_dir / "dumps"
        if candidate.is_dir():
            dump_dir = candidate
        else:
            raise CliError(f"{dump_dir} is not a directory")
    paths = sorted(dump_dir.glob("*.dump"))
    if not paths:
        nested = dump_dir / "dumps"
        if nested.is_dir():
            paths = sorted(nested.glob("*.dump"))
    if not paths:
        raise CliError(f"no .dump files under {dump_dir}")
    return [read_dump(p) for p in paths]


def _merged_profile(dumps: List[Dump]) -> FunctionProfile:
    return merge_profiles([profile_from_dump(d) for d in dumps])


def _rules(path: Optional[str]) -> Optional[CategoryRules]:
    return load_rules(path) if path else None


def cmd_run(args: argparse.Namespace) -> int:
    config = load_scenario(args.scenario)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode is not None:
        overrides["entity_mode"] = args.mode
    if overrides:
        config = config.with_overrides(**overrides)
    levels = _parse_levels(args.levels)
    out = Path(args.out) if args.out else Path(f"run-{config.scenario_id}")
    out.mkdir(parents=True, exist_ok=True)
    for stale in (out / "dumps").glob("*.dump"):
        stale.unlink()  # a rerun must not mix with a previous run's dumps
    recorder = Recorder(enabled=bool(set(levels) & {"function", "line", "thread", "sample"}))
    run_id = f"{config.scenario_id}-seed{config.seed}"
    topo = bootstrap(config, run_dir=out, recorder=recorder, run_id=run_id, levels=levels)
    load_report = None
    try:
        remaining = config.run_duration_s
        if config.client_users > 0 and config.run_duration_s > 0:
            t0 = time.monotonic()
            load_report = topo.client_load(
                users=config.client_users,
                rate_rps=config.client_request_rate,
                duration_s=config.run_duration_s,
            )
            remaining = config.run_duration_s - (time.monotonic() - t0)
        if remaining > 0:
            with recorder.region(SITE_RUN_WINDOW):
                time.sleep(remaining)
    finally:
        coarse = topo.shutdown()
    _write_run_artifacts(out, topo, config, coarse, load_report)
    print(out)
    return EXIT_OK


def _write_run_artifacts(
    out: Path,
    topo,
    config: ScenarioConfig,
    coarse: Dict[str, Optional[CoarseBreakdown]],
    load_report,
) -> None:
    timeline_lines = []
    entries = sorted(topo.timeline.values(), key=lambda e: e.monotonic_s)
    base = entries[0].monotonic_s if entries else 0.0
    for e in entries:
        timeline_lines.append(
            f"{e.phase.name}\t{e.wall_s!r}\t{e.monotonic_s - base:.6f}"
        )
    (out / "timeline.txt").write_text("\n".join(timeline_lines) + "\n", encoding="utf-8")
    # dump footers are the uniform coarse source: per-process splits in
    # process mode, per-thread splits in thread mode; supervisor rusage
    # (when available) refines the process-mode numbers
    breakdowns = {}
    if topo.dumps_dir is not None and topo.dumps_dir.exists():
        for path in sorted(topo.dumps_dir.glob("*.dump")):
            dump = read_dump(path)
            if dump.coarse is not None:
                breakdowns[dump.meta.entity] = dump.coarse
    for name, b in coarse.items():
        if b is not None:
            breakdowns[name] = b
    spec = ReportSpec(kind=ReportKind.COARSE_TABLE, output=out / "coarse.txt")
    write_report(breakdowns, spec)
    write_export(breakdowns, ReportKind.COARSE_TABLE, out / "coarse.json")
    if load_report is not None:
        (out / "load_report.json").write_text(
            json.dumps(load_report.to_payload(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
    if topo.dumps_dir is not None and topo.dumps_dir.exists():
        write_dump_index(topo.dumps_dir)
    (out / "summary.txt").write_text(render_summary(out), encoding="utf-8")


def cmd_analyze(args: argparse.Namespace) -> int:
    dumps = _load_dumps(Path(args.dumps))
    merged = _merged_profile(dumps)
    findings = find_hotspots(merged, min_share_pct=args.threshold, rules=_rules(args.rules))
    out = Path(args.out) if args.out else Path(args.dumps) / "findings.json"
    write_export(findings, ReportKind.HOTSPOT_REPORT, out)
    print(out)
    return EXIT_OK


def _find_scope(dumps: List[Dump], symbol: str) -> Tuple[Dump, CodeSite]:
    for dump in dumps:
        for ev in dump.events:
            if ev.site.symbol == symbol and ev.site.kind is SiteKind.FUNCTION:
                return dump, ev.site
    raise UnknownScope(f"no function site named {symbol!r} in any dump")


def cmd_report(args: argparse.Namespace) -> int:
    kind = ReportKind(args.kind)
    fmt = ReportFormat(args.format)
    if args.export:
        loaded_kind, data = read_export(Path(args.export))
        if loaded_kind is not kind:
            raise CliError(f"export holds {loaded_kind.value}, not {kind.value}")
    else:
        dumps = _load_dumps(Path(args.dumps))
        if kind is ReportKind.FUNCTION_TABLE:
            data = _merged_profile(dumps)
        elif kind is ReportKind.LINE_TABLE:
            if not args.scope:
                raise CliError("line_table needs --scope <function symbol>")
            dump, scope = _find_scope(dumps, args.scope)
            data = aggregate_regions(dump.events, scope)
        elif kind is ReportKind.THREAD_TABLE:
            wanted = args.entity or "orchestrator"
            matches = [d for d in dumps if d.meta.entity == wanted]
            if not matches:
                raise CliError(f"no dump for entity {wanted!r}")
            data = aggregate_threads(matches[0].events)
        elif kind is ReportKind.COARSE_TABLE:
            data = {
                d.meta.entity: d.coarse for d in dumps if d.coarse is not None
            }
        elif kind is ReportKind.HOTSPOT_REPORT:
            data = find_hotspots(
                _merged_profile(dumps), min_share_pct=args.threshold, rules=_rules(args.rules)
            )
        else:
            raise CliError("compare_report comes from the compare command")
    suffix = {"text": "txt", "csv": "csv", "structured": "json"}[fmt.value]
    out = Path(args.out) if args.out else Path(f"{kind.value}.{suffix}")
    spec = ReportSpec(kind=kind, sort_key=args.sort, top_n=args.top, output=out, format=fmt)
    write_report(data, spec)
    print(out)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    before = _merged_profile(_load_dumps(Path(args.before)))
    after = _merged_profile(_load_dumps(Path(args.after)))
    report = compare(before, after, rules=_rules(args.rules), regression_epsilon_s=args.epsilon)
    out = Path(args.out) if args.out else Path("compare_report.txt")
    spec = ReportSpec(kind=ReportKind.COMPARE_REPORT, output=out, top_n=args.top)
    write_report(report, spec)
    print(out)
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    cal = calibrate_clocks()
    record = {
        "wall_cost_ns": cal.wall_cost_ns,
        "cpu_cost_ns": cal.cpu_cost_ns,
        "cpu_refresh_wall_ns": cal.cpu_refresh_wall_ns,
        "pair_overhead_ns": cal.pair_overhead_ns,
        "overhead_budget_ns": cal.overhead_budget_ns,
    }
    out = Path(args.out) if args.out else Path("calibration.json")
    out.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planeprof",
        description="Profile a control-plane testbed at coarse, function, "
        "statement and thread granularity.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and collect dumps")
    p.add_argument("--scenario", required=True, help="scenario file path")
    p.add_argument("--out", help="run directory (default run-<scenario_id>)")
    p.add_argument("--levels", help=f"comma list of {','.join(LEVELS)}")
    p.add_argument("--seed", type=int, help="override scenario seed")
    p.add_argument("--mode", choices=("process", "thread"), help="entity mode override")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="classify dumps and rank hotspots")
    p.add_argument("--dumps", required=True, help="run or dumps directory")
    p.add_argument("--threshold", type=float, default=1.0, help="min share %% per finding")
    p.add_argument("--rules", help="category rules file")
    p.add_argument("--out", help="findings file (default <dumps>/findings.json)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="render one table from dumps or an export")
    p.add_argument("--dumps", help="run or dumps directory")
    p.add_argument("--export", help="structured export to re-render")
    p.add_argument(
        "--kind",
        default="function_table",
        choices=[k.value for k in ReportKind if k is not ReportKind.COMPARE_REPORT],
    )
    p.add_argument("--sort", help="sort key for the kind")
    p.add_argument("--top", type=int, help="limit to top N rows")
    p.add_argument("--format", default="text", choices=[f.value for f in ReportFormat])
    p.add_argument("--scope", help="function symbol for line_table")
    p.add_argument("--entity", help="entity for thread_table")
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--rules", help="category rules file")
    p.add_argument("--out", help="output path")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("compare", help="delta report between two runs")
    p.add_argument("--before", required=True)
    p.add_argument("--after", required=True)
    p.add_argument("--epsilon", type=float, default=0.05, help="regression flag threshold (s)")
    p.add_argument("--top", type=int, help="limit site delta rows")
    p.add_argument("--rules", help="category rules file")
    p.add_argument("--out", help="output path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("calibrate", help="measure per-event overhead on this host")
    p.add_argument("--out", help="output path (default calibration.json)")
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "report" and not (args.dumps or args.export):
        parser.error("report needs --dumps or --export")
    try:
        return args.func(args)
    except (
        CliError,
        ScenarioError,
        InvalidSortKey,
        ScenarioMismatch,
        RunIdMismatch,
        UnknownScope,
        DumpFormatError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        BootstrapTimeout,
        EntitySpawnFailed,
        PortUnavailable,
        NoActiveWorkflow,
        TimeoutError,
    ) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
