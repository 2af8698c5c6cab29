"""Lossless CSV and versioned structured (JSON) exports.

Times stay integer nanoseconds and floats are written with ``repr`` so a
re-parse reproduces every numeric field exactly. The structured format is
also the merged-profile and findings file format.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import List

from planeprof.analysis.categories import TimeCategory
from planeprof.analysis.hotspots import CategoryDelta, CompareReport, HotspotFinding, SiteDelta
from planeprof.instrument.events import CodeSite, SiteKind
from planeprof.instrument.proctimes import CoarseBreakdown
from planeprof.model.stats import (
    FunctionProfile,
    FunctionStats,
    RegionProfile,
    RegionStats,
    ThreadStats,
)
from planeprof.reporting.tables import ReportKind

EXPORT_FORMAT = "planeprof-export"
EXPORT_VERSION = 1


class ExportFormatError(Exception):
    """The file is not a readable export."""


def _site_dict(site: CodeSite) -> dict:
    return {"file": site.file, "line": site.line, "symbol": site.symbol, "kind": site.kind.value}


def _site_from(d: dict) -> CodeSite:
    return CodeSite(d["file"], int(d["line"]), d["symbol"], SiteKind(d["kind"]))


# -- CSV ----------------------------------------------------------------------

FUNCTION_CSV_FIELDS = [
    "file", "line", "symbol", "kind", "tag",
    "ncalls_total", "ncalls_primitive", "tottime_ns", "cumtime_ns",
]
REGION_CSV_FIELDS = [
    "scope_file", "scope_line", "scope_symbol", "scope_time_ns",
    "file", "line", "symbol", "hits", "time_ns", "pct_time",
]
THREAD_CSV_FIELDS = ["thread", "file", "line", "symbol", "kind", "ncall", "tsub_ns", "ttot_ns"]
COARSE_CSV_FIELDS = ["entity", "elapsed_s", "user_s", "system_s"]
HOTSPOT_CSV_FIELDS = ["category", "share_pct", "file", "line", "symbol", "recommendation"]
COMPARE_CSV_FIELDS = ["category", "before_ns", "after_ns"]


def export_csv(data, kind: ReportKind) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if kind is ReportKind.FUNCTION_TABLE:
        writer.writerow(FUNCTION_CSV_FIELDS)
        for r in sorted(data.rows.values(), key=lambda r: r.site.label()):
            writer.writerow(
                [
                    r.site.file, r.site.line, r.site.symbol, r.site.kind.value,
                    r.tag or "", r.ncalls_total, r.ncalls_primitive,
                    r.tottime_ns, r.cumtime_ns,
                ]
            )
    elif kind is ReportKind.LINE_TABLE:
        writer.writerow(REGION_CSV_FIELDS)
        scope = data.scope
        for r in sorted(data.rows.values(), key=lambda r: r.site.line):
            writer.writerow(
                [
                    scope.file, scope.line, scope.symbol, data.scope_time_ns,
                    r.site.file, r.site.line, r.site.symbol,
                    r.hits, r.time_ns, repr(r.pct_time),
                ]
            )
    elif kind is ReportKind.THREAD_TABLE:
        writer.writerow(THREAD_CSV_FIELDS)
        for r in sorted(data, key=lambda r: (r.name, r.site.label())):
            writer.writerow(
                [
                    r.name, r.site.file, r.site.line, r.site.symbol,
                    r.site.kind.value, r.ncall, r.tsub_ns, r.ttot_ns,
                ]
            )
    elif kind is ReportKind.COARSE_TABLE:
        writer.writerow(COARSE_CSV_FIELDS)
        for name, b in sorted(data.items()):
            writer.writerow([name, repr(b.elapsed_s), repr(b.user_s), repr(b.system_s)])
    elif kind is ReportKind.HOTSPOT_REPORT:
        writer.writerow(HOTSPOT_CSV_FIELDS)
        for f in data:
            writer.writerow(
                [
                    f.category.value, repr(f.share_pct),
                    f.site.file if f.site else "", f.site.line if f.site else "",
                    f.site.symbol if f.site else "", f.recommendation,
                ]
            )
    elif kind is ReportKind.COMPARE_REPORT:
        writer.writerow(COMPARE_CSV_FIELDS)
        for d in data.categories:
            writer.writerow([d.category.value, d.before_ns, d.after_ns])
    else:
        raise ValueError(f"no csv export for {kind}")
    return out.getvalue()


def import_function_csv(text: str) -> FunctionProfile:
    profile = FunctionProfile()
    for row in csv.DictReader(io.StringIO(text)):
        site = CodeSite(
            row["file"], int(row["line"]), row["symbol"], SiteKind(row["kind"])
        )
        profile.rows[site] = FunctionStats(
            site=site,
            ncalls_total=int(row["ncalls_total"]),
            ncalls_primitive=int(row["ncalls_primitive"]),
            tottime_ns=int(row["tottime_ns"]),
            cumtime_ns=int(row["cumtime_ns"]),
            tag=row["tag"] or None,
        )
    return profile


def import_region_csv(text: str) -> RegionProfile:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ExportFormatError("empty region csv")
    first = rows[0]
    scope = CodeSite(
        first["scope_file"], int(first["scope_line"]), first["scope_symbol"], SiteKind.FUNCTION
    )
    profile = RegionProfile(scope=scope, scope_time_ns=int(first["scope_time_ns"]))
    for row in rows:
        site = CodeSite(row["file"], int(row["line"]), row["symbol"], SiteKind.REGION)
        profile.rows[site] = RegionStats(
            site=site,
            hits=int(row["hits"]),
            time_ns=int(row["time_ns"]),
            pct_time=float(row["pct_time"]),
        )
    return profile


def import_thread_csv(text: str) -> List[ThreadStats]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(
            ThreadStats(
                name=row["thread"],
                site=CodeSite(
                    row["file"], int(row["line"]), row["symbol"], SiteKind(row["kind"])
                ),
                ncall=int(row["ncall"]),
                tsub_ns=int(row["tsub_ns"]),
                ttot_ns=int(row["ttot_ns"]),
            )
        )
    return out


# -- structured JSON -----------------------------------------------------------

def export_json(data, kind: ReportKind) -> str:
    doc: dict = {"format": EXPORT_FORMAT, "version": EXPORT_VERSION, "kind": kind.value}
    if kind is ReportKind.FUNCTION_TABLE:
        doc["meta"] = {
            "run_id": data.run_id,
            "scenario": data.scenario,
            "scale_factor": data.scale_factor,
            "sources": list(data.sources),
            "wall_span_ns": data.wall_span_ns,
        }
        doc["rows"] = [
            {
                "site": _site_dict(r.site),
                "tag": r.tag,
                "ncalls_total": r.ncalls_total,
                "ncalls_primitive": r.ncalls_primitive,
                "tottime_ns": r.tottime_ns,
                "cumtime_ns": r.cumtime_ns,
            }
            for r in sorted(data.rows.values(), key=lambda r: r.site.label())
        ]
    elif kind is ReportKind.LINE_TABLE:
        doc["meta"] = {"scope": _site_dict(data.scope), "scope_time_ns": data.scope_time_ns}
        doc["rows"] = [
            {
                "site": _site_dict(r.site),
                "hits": r.hits,
                "time_ns": r.time_ns,
                "pct_time": r.pct_time,
            }
            for r in sorted(data.rows.values(), key=lambda r: r.site.line)
        ]
    elif kind is ReportKind.THREAD_TABLE:
        doc["rows"] = [
            {
                "thread": r.name,
                "site": _site_dict(r.site),
                "ncall": r.ncall,
                "tsub_ns": r.tsub_ns,
                "ttot_ns": r.ttot_ns,
            }
            for r in sorted(data, key=lambda r: (r.name, r.site.label()))
        ]
    elif kind is ReportKind.COARSE_TABLE:
        doc["rows"] = [
            {"entity": name, "elapsed_s": b.elapsed_s, "user_s": b.user_s, "system_s": b.system_s}
            for name, b in sorted(data.items())
        ]
    elif kind is ReportKind.HOTSPOT_REPORT:
        doc["rows"] = [
            {
                "category": f.category.value,
                "share_pct": f.share_pct,
                "site": _site_dict(f.site) if f.site else None,
                "recommendation": f.recommendation,
                "evidence": [
                    {
                        "site": _site_dict(e.site),
                        "tottime_ns": e.tottime_ns,
                        "cumtime_ns": e.cumtime_ns,
                        "ncalls_total": e.ncalls_total,
                        "ncalls_primitive": e.ncalls_primitive,
                    }
                    for e in f.evidence
                ],
            }
            for f in data
        ]
    elif kind is ReportKind.COMPARE_REPORT:
        doc["meta"] = {"scenario": data.scenario}
        doc["categories"] = [
            {"category": d.category.value, "before_ns": d.before_ns, "after_ns": d.after_ns}
            for d in data.categories
        ]
        doc["regressions"] = [d.category.value for d in data.regressions]
        doc["sites"] = [
            {
                "site": _site_dict(s.site),
                "ncalls_before": s.ncalls_before,
                "ncalls_after": s.ncalls_after,
                "tottime_before_ns": s.tottime_before_ns,
                "tottime_after_ns": s.tottime_after_ns,
            }
            for s in data.sites
        ]
    else:
        raise ValueError(f"no structured export for {kind}")
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def import_json(text: str):
    """Read a structured export; returns ``(kind, data)``."""
    doc = json.loads(text)
    if doc.get("format") != EXPORT_FORMAT:
        raise ExportFormatError("not a planeprof export")
    if doc.get("version") != EXPORT_VERSION:
        raise ExportFormatError(f"unsupported export version {doc.get('version')}")
    kind = ReportKind(doc["kind"])
    if kind is ReportKind.FUNCTION_TABLE:
        meta = doc.get("meta", {})
        profile = FunctionProfile(
            run_id=meta.get("run_id", "-"),
            scenario=meta.get("scenario", "-"),
            scale_factor=float(meta.get("scale_factor", 1.0)),
            sources=tuple(meta.get("sources", ())),
            wall_span_ns=int(meta.get("wall_span_ns", 0)),
        )
        for row in doc["rows"]:
            site = _site_from(row["site"])
            profile.rows[site] = FunctionStats(
                site=site,
                ncalls_total=int(row["ncalls_total"]),
                ncalls_primitive=int(row["ncalls_primitive"]),
                tottime_ns=int(row["tottime_ns"]),
                cumtime_ns=int(row["cumtime_ns"]),
                tag=row.get("tag"),
            )
        return kind, profile
    if kind is ReportKind.LINE_TABLE:
        meta = doc["meta"]
        profile = RegionProfile(
            scope=_site_from(meta["scope"]), scope_time_ns=int(meta["scope_time_ns"])
        )
        for row in doc["rows"]:
            site = _site_from(row["site"])
            profile.rows[site] = RegionStats(
                site=site,
                hits=int(row["hits"]),
                time_ns=int(row["time_ns"]),
                pct_time=float(row["pct_time"]),
            )
        return kind, profile
    if kind is ReportKind.THREAD_TABLE:
        return kind, [
            ThreadStats(
                name=row["thread"],
                site=_site_from(row["site"]),
                ncall=int(row["ncall"]),
                tsub_ns=int(row["tsub_ns"]),
                ttot_ns=int(row["ttot_ns"]),
            )
            for row in doc["rows"]
        ]
    if kind is ReportKind.COARSE_TABLE:
        return kind, {
            row["entity"]: CoarseBreakdown(
                elapsed_s=float(row["elapsed_s"]),
                user_s=float(row["user_s"]),
                system_s=float(row["system_s"]),
            )
            for row in doc["rows"]
        }
    if kind is ReportKind.HOTSPOT_REPORT:
        findings = []
        for row in doc["rows"]:
            evidence = tuple(
                FunctionStats(
                    site=_site_from(e["site"]),
                    ncalls_total=int(e["ncalls_total"]),
                    ncalls_primitive=int(e.get("ncalls_primitive", e["ncalls_total"])),
                    tottime_ns=int(e["tottime_ns"]),
                    cumtime_ns=int(e["cumtime_ns"]),
                )
                for e in row.get("evidence", [])
            )
            findings.append(
                HotspotFinding(
                    category=TimeCategory(row["category"]),
                    site=_site_from(row["site"]) if row.get("site") else None,
                    share_pct=float(row["share_pct"]),
                    evidence=evidence,
                    recommendation=row["recommendation"],
                )
            )
        return kind, findings
    if kind is ReportKind.COMPARE_REPORT:
        categories = [
            CategoryDelta(
                category=TimeCategory(c["category"]),
                before_ns=int(c["before_ns"]),
                after_ns=int(c["after_ns"]),
            )
            for c in doc["categories"]
        ]
        regression_names = set(doc.get("regressions", []))
        report = CompareReport(
            scenario=doc.get("meta", {}).get("scenario", "-"),
            categories=categories,
            sites=[
                SiteDelta(
                    site=_site_from(s["site"]),
                    ncalls_before=int(s["ncalls_before"]),
                    ncalls_after=int(s["ncalls_after"]),
                    tottime_before_ns=int(s["tottime_before_ns"]),
                    tottime_after_ns=int(s["tottime_after_ns"]),
                )
                for s in doc.get("sites", [])
            ],
            regressions=[c for c in categories if c.category.value in regression_names],
        )
        return kind, report
    raise ExportFormatError(f"unsupported kind {kind}")


def write_export(data, kind: ReportKind, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(export_json(data, kind), encoding="utf-8")
    return path


def read_export(path: Path | str):
    return import_json(Path(path).read_text(encoding="utf-8"))
