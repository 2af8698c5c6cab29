"""Text table rendering with pinned, golden-tested headers.

Each table kind has one header line whose bytes never change; values are
formatted at presentation time (half-up rounding, seconds in function
tables, microseconds in line tables). Sorting is stable: rows with equal
keys keep their input order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

from planeprof.analysis.hotspots import CompareReport, HotspotFinding
from planeprof.analysis.percentages import coarse_percentages, round_half_up
from planeprof.instrument.proctimes import CoarseBreakdown
from planeprof.model.stats import FunctionProfile, RegionProfile, ThreadStats


class InvalidSortKey(Exception):
    """The sort key is not valid for this table kind."""


class ReportKind(str, Enum):
    FUNCTION_TABLE = "function_table"
    LINE_TABLE = "line_table"
    THREAD_TABLE = "thread_table"
    COARSE_TABLE = "coarse_table"
    HOTSPOT_REPORT = "hotspot_report"
    COMPARE_REPORT = "compare_report"


class ReportFormat(str, Enum):
    TEXT = "text"
    CSV = "csv"
    STRUCTURED = "structured"


@dataclass(frozen=True)
class ReportSpec:
    kind: ReportKind
    sort_key: Optional[str] = None
    top_n: Optional[int] = None
    output: Optional[Path] = None  # None = stdout
    format: ReportFormat = ReportFormat.TEXT

    def __post_init__(self) -> None:
        if self.top_n is not None and self.top_n < 1:
            raise ValueError("top_n must be >= 1 or None for unlimited")


FUNCTION_HEADER = "   ncalls  tottime  percall  cumtime  percall filename:lineno(function)"
LINE_HEADER = "Line #      Hits         Time  Per Hit   % Time  Line Contents"
LINE_RULE = "=" * len(LINE_HEADER)
THREAD_HEADER = "name                                      ncall      tsub      ttot      tavg"

_FUNCTION_SORTS = {
    "cumtime": ("cumulative time", lambda r: -r.cumtime_ns),
    "tottime": ("internal time", lambda r: -r.tottime_ns),
    "ncalls": ("call count", lambda r: -r.ncalls_total),
    "name": ("function name", lambda r: r.site.label()),
}
_LINE_SORTS = {
    "line": ("line number", lambda r: r.site.line),
    "time": ("line time, desc", lambda r: -r.time_ns),
    "hits": ("hit count, desc", lambda r: -r.hits),
}
_THREAD_SORTS = {
    "ttot": ("totaltime, desc", lambda r: -r.ttot_ns),
    "tsub": ("subtime, desc", lambda r: -r.tsub_ns),
    "ncall": ("callcount, desc", lambda r: -r.ncall),
    "name": ("name", lambda r: (r.name, r.site.label())),
}
_DEFAULT_SORT = {
    ReportKind.FUNCTION_TABLE: "cumtime",
    ReportKind.LINE_TABLE: "line",
    ReportKind.THREAD_TABLE: "ttot",
}


def _pick_sort(kind: ReportKind, sort_key: Optional[str]):
    table = {
        ReportKind.FUNCTION_TABLE: _FUNCTION_SORTS,
        ReportKind.LINE_TABLE: _LINE_SORTS,
        ReportKind.THREAD_TABLE: _THREAD_SORTS,
    }[kind]
    key = sort_key or _DEFAULT_SORT[kind]
    if key not in table:
        raise InvalidSortKey(f"{key!r} is not a sort key for {kind.value}")
    return table[key]


def _f8(value_s: float) -> str:
    return f"{value_s:8.3f}"


def _render_function_table(profile: FunctionProfile, spec: ReportSpec) -> str:
    label, keyfn = _pick_sort(ReportKind.FUNCTION_TABLE, spec.sort_key)
    rows = sorted(profile.rows.values(), key=keyfn)
    if spec.top_n is not None:
        rows = rows[: spec.top_n]
    total_s = profile.total_time_ns / 1e9
    lines = [
        f"{profile.total_calls} function calls "
        f"({profile.primitive_calls} primitive calls) in {total_s:.3f} seconds",
        "",
        f"Ordered by: {label}",
        "",
        FUNCTION_HEADER,
    ]
    for r in rows:
        lines.append(
            f"{r.ncalls_label:>9} {_f8(r.tottime_s)} {_f8(r.percall_tot_s)} "
            f"{_f8(r.cumtime_s)} {_f8(r.percall_cum_s)} {r.site.label()}"
        )
    return "\n".join(lines) + "\n"


def _render_line_table(profile: RegionProfile, spec: ReportSpec) -> str:
    label, keyfn = _pick_sort(ReportKind.LINE_TABLE, spec.sort_key)
    rows = sorted(profile.rows.values(), key=keyfn)
    if spec.top_n is not None:
        rows = rows[: spec.top_n]
    scope = profile.scope
    lines = [
        "Timer unit: 1e-06 s",
        "",
        f"Total time: {profile.scope_time_ns / 1e9:.6f} s",
        f"Function: {scope.symbol} at {scope.file}:{scope.line}",
        f"Ordered by: {label}",
        "",
        LINE_HEADER,
        LINE_RULE,
    ]
    for r in rows:
        time_us = r.time_ns / 1e3
        per_hit_us = (r.per_hit_s or 0.0) * 1e6
        lines.append(
            f"{r.site.line:>6} {r.hits:>9} {time_us:>12.1f} {per_hit_us:>8.1f} "
            f"{round_half_up(r.pct_time, 1):>8.1f}  {r.site.symbol}"
        )
    return "\n".join(lines) + "\n"


def _render_thread_table(rows: Sequence[ThreadStats], spec: ReportSpec) -> str:
    label, keyfn = _pick_sort(ReportKind.THREAD_TABLE, spec.sort_key)
    ordered = sorted(rows, key=keyfn)
    if spec.top_n is not None:
        ordered = ordered[: spec.top_n]
    lines = [
        "Clock type: wall",
        "",
        f"Ordered by: {label}",
        "",
        THREAD_HEADER,
    ]
    for r in ordered:
        name = f"{r.name}/{r.site.symbol}"
        if len(name) > 40:
            name = ".." + name[-38:]
        lines.append(
            f"{name:<40} {r.ncall:>6} {r.tsub_s:>9.6f} {r.ttot_s:>9.6f} {r.tavg_s:>9.6f}"
        )
    return "\n".join(lines) + "\n"


def _render_coarse_table(breakdowns: Dict[str, CoarseBreakdown], spec: ReportSpec) -> str:
    lines = [
        "Coarse time split (seconds)",
        "",
        "entity                 elapsed      user    system     other    user%     sys%   other%",
    ]
    items = sorted(breakdowns.items())
    if spec.top_n is not None:
        items = items[: spec.top_n]
    for name, b in items:
        pc = coarse_percentages(b) if b.elapsed_s > 0 else None
        flags = " oversubscribed" if b.oversubscribed else ""
        pct = (
            f"{round_half_up(pc.user_pct):>8.2f} {round_half_up(pc.sys_pct):>8.2f} "
            f"{round_half_up(pc.other_pct):>8.2f}"
            if pc
            else f"{'-':>8} {'-':>8} {'-':>8}"
        )
        lines.append(
            f"{name:<20} {b.elapsed_s:>9.3f} {b.user_s:>9.3f} {b.system_s:>9.3f} "
            f"{b.other_s:>9.3f} {pct}{flags}"
        )
    lines.append("")
    lines.append("other = I/O wait + unattributed time")
    return "\n".join(lines) + "\n"


def _render_hotspots(findings: Sequence[HotspotFinding], spec: ReportSpec) -> str:
    rows = list(findings)
    if spec.top_n is not None:
        rows = rows[: spec.top_n]
    lines = [
        "Hotspot findings (ranked by share of run time)",
        "",
        "rank  category        share%  site",
    ]
    for i, f in enumerate(rows, 1):
        site = f.site.label() if f.site else "-"
        lines.append(
            f"{i:>4}  {f.category.value:<14} {round_half_up(f.share_pct):>7.2f}  {site}"
        )
        lines.append(f"      -> {f.recommendation}")
    if not rows:
        lines.append("(no findings above threshold)")
    return "\n".join(lines) + "\n"


def _render_compare(report: CompareReport, spec: ReportSpec) -> str:
    lines = [
        f"Before/after comparison for scenario {report.scenario!r}",
        "",
        "category         before_s   after_s   delta_s  delta%",
    ]
    for d in report.categories:
        pct = f"{round_half_up(d.delta_pct):>7.2f}" if d.delta_pct is not None else "      -"
        lines.append(
            f"{d.category.value:<14} {d.before_ns / 1e9:>10.3f} {d.after_ns / 1e9:>9.3f} "
            f"{d.delta_s:>9.3f} {pct}"
        )
    if report.regressions:
        lines.append("")
        lines.append("regressions:")
        for d in report.regressions:
            lines.append(f"  {d.category.value} grew by {d.delta_s:.3f} s")
    movers = [s for s in report.sites if s.tottime_delta_ns != 0 or s.ncalls_delta != 0]
    movers.sort(key=lambda s: (-abs(s.tottime_delta_ns), s.site.label()))
    top = movers[: spec.top_n] if spec.top_n is not None else movers
    if top:
        lines.append("")
        lines.append("site deltas (tottime_s, ncalls):")
        for s in top:
            lines.append(
                f"  {s.site.label():<46} {s.tottime_delta_ns / 1e9:>+9.3f} "
                f"{s.ncalls_delta:>+8}"
            )
    return "\n".join(lines) + "\n"


RenderInput = Union[
    FunctionProfile,
    RegionProfile,
    Sequence[ThreadStats],
    Dict[str, CoarseBreakdown],
    Sequence[HotspotFinding],
    CompareReport,
]


def render(data: RenderInput, spec: ReportSpec) -> str:
    """Render ``data`` as the requested kind and format."""
    if spec.format is not ReportFormat.TEXT:
        from planeprof.reporting.exports import export_csv, export_json

        if spec.format is ReportFormat.CSV:
            return export_csv(data, spec.kind)
        return export_json(data, spec.kind)
    if spec.kind is ReportKind.FUNCTION_TABLE:
        if not isinstance(data, FunctionProfile):
            raise TypeError("function_table needs a FunctionProfile")
        return _render_function_table(data, spec)
    if spec.kind is ReportKind.LINE_TABLE:
        if not isinstance(data, RegionProfile):
            raise TypeError("line_table needs a RegionProfile")
        return _render_line_table(data, spec)
    if spec.kind is ReportKind.THREAD_TABLE:
        if isinstance(data, (FunctionProfile, RegionProfile, CompareReport, dict)):
            raise TypeError("thread_table needs thread rows")
        return _render_thread_table(list(data), spec)  # type: ignore[arg-type]
    if spec.kind is ReportKind.COARSE_TABLE:
        if not isinstance(data, dict):
            raise TypeError("coarse_table needs a name -> breakdown mapping")
        return _render_coarse_table(data, spec)
    if spec.kind is ReportKind.HOTSPOT_REPORT:
        rows = list(data)  # type: ignore[arg-type]
        if rows and not isinstance(rows[0], HotspotFinding):
            raise TypeError("hotspot_report needs findings")
        return _render_hotspots(rows, spec)
    if spec.kind is ReportKind.COMPARE_REPORT:
        if not isinstance(data, CompareReport):
            raise TypeError("compare_report needs a CompareReport")
        return _render_compare(data, spec)
    raise ValueError(f"unsupported report kind {spec.kind}")


def write_report(data: RenderInput, spec: ReportSpec) -> Optional[Path]:
    """Render and write to ``spec.output``; None means caller prints."""
    document = render(data, spec)
    if spec.output is None:
        print(document, end="")
        return None
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    spec.output.write_text(document, encoding="utf-8")
    return spec.output
