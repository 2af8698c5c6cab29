"""Profile dump files: one self-describing text file per profiled process.

Layout (tab-separated records, one per line, stable field order):

    profile-dump 1
    run_id <id>
    entity <name>
    role <role>
    pid <pid>
    scenario <scenario id>
    seed <int>
    levels <comma separated>
    scale_factor <float>
    wall_cost_ns <int>          # measured cost of one wall clock read
    cpu_cost_ns <int>           # measured cost of one CPU clock read
    cpu_refresh_wall_ns <int>   # 0 = CPU clock read on every event
    pair_overhead_ns <int>      # calibrated enter/exit pair cost
    end_header
    E\t<thread>\t<wall_ns>\t<cpu_ns>\t<file>\t<line>\t<symbol>\t<site kind>\t<tag or ->
    X\t... (same fields)
    S\t<thread>\t<wall_ns>\t<cpu_ns>\t<frame>|<frame>|...   frame = file:line:symbol
    V\t<thread>\t<wall_ns>\t<file>\t<line>\t<symbol>\t<site kind>\t<detail>
    end_events
    coarse\t<elapsed_s>\t<user_s>\t<system_s>
    end_dump

All times are integer nanoseconds except the coarse footer, which keeps
the float seconds the OS reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

from planeprof.instrument.events import (
    CodeSite,
    EventKind,
    NestingViolation,
    ProfileEvent,
    SiteKind,
)
from planeprof.instrument.proctimes import CoarseBreakdown
from planeprof.instrument.recorder import ClockCalibration

FORMAT_LINE = "profile-dump 1"

_KIND_CODE = {SiteKind.FUNCTION: "F", SiteKind.REGION: "R", SiteKind.BUILTIN: "B"}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


class DumpFormatError(Exception):
    """The file is not a readable profile dump."""


@dataclass(frozen=True)
class DumpMeta:
    """Identity of the process a dump describes."""

    run_id: str
    entity: str
    role: str = "-"
    pid: int = 0
    scenario: str = "-"
    seed: int = 0
    levels: tuple[str, ...] = ()
    scale_factor: float = 1.0


@dataclass
class Dump:
    meta: DumpMeta
    calibration: ClockCalibration
    events: List[ProfileEvent] = field(default_factory=list)
    violations: List[NestingViolation] = field(default_factory=list)
    coarse: Optional[CoarseBreakdown] = None


def _clean(text: str) -> str:
    return text.replace("\t", " ").replace("\n", " ")


def _frame_str(site: CodeSite) -> str:
    return f"{_clean(site.file)}:{site.line}:{_clean(site.symbol)}"


def _parse_frame(text: str) -> CodeSite:
    file, line, symbol = text.rsplit(":", 2)
    return CodeSite(file=file, line=int(line), symbol=symbol, kind=SiteKind.FUNCTION)


def write_dump(
    path: Path | str,
    meta: DumpMeta,
    calibration: ClockCalibration,
    events: Sequence[ProfileEvent],
    violations: Sequence[NestingViolation] = (),
    coarse: Optional[CoarseBreakdown] = None,
) -> Path:
    path = Path(path)
    lines: List[str] = [FORMAT_LINE]
    lines.append(f"run_id {meta.run_id}")
    lines.append(f"entity {meta.entity}")
    lines.append(f"role {meta.role}")
    lines.append(f"pid {meta.pid}")
    lines.append(f"scenario {meta.scenario}")
    lines.append(f"seed {meta.seed}")
    lines.append(f"levels {','.join(meta.levels)}")
    lines.append(f"scale_factor {meta.scale_factor!r}")
    lines.append(f"wall_cost_ns {calibration.wall_cost_ns}")
    lines.append(f"cpu_cost_ns {calibration.cpu_cost_ns}")
    lines.append(f"cpu_refresh_wall_ns {calibration.cpu_refresh_wall_ns}")
    lines.append(f"pair_overhead_ns {calibration.pair_overhead_ns}")
    lines.append("end_header")
    for ev in events:
        if ev.kind is EventKind.SAMPLE:
            stack = "|".join(_frame_str(s) for s in (ev.stack or ()))
            lines.append(f"S\t{ev.thread_id}\t{ev.wall_ns}\t{ev.cpu_ns}\t{stack}")
        else:
            code = "E" if ev.kind is EventKind.ENTER else "X"
            lines.append(
                f"{code}\t{ev.thread_id}\t{ev.wall_ns}\t{ev.cpu_ns}"
                f"\t{_clean(ev.site.file)}\t{ev.site.line}\t{_clean(ev.site.symbol)}"
                f"\t{_KIND_CODE[ev.site.kind]}\t{ev.tag if ev.tag else '-'}"
            )
    for v in violations:
        lines.append(
            f"V\t{v.thread_id}\t{v.wall_ns}\t{_clean(v.site.file)}\t{v.site.line}"
            f"\t{_clean(v.site.symbol)}\t{_KIND_CODE[v.site.kind]}\t{_clean(v.detail)}"
        )
    lines.append("end_events")
    if coarse is not None:
        lines.append(f"coarse\t{coarse.elapsed_s!r}\t{coarse.user_s!r}\t{coarse.system_s!r}")
    lines.append("end_dump")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _parse_header(lines: List[str]) -> tuple[DumpMeta, ClockCalibration, int]:
    if not lines or lines[0].strip() != FORMAT_LINE:
        raise DumpFormatError("missing or unsupported dump format line")
    fields = {}
    i = 1
    while i < len(lines):
        line = lines[i].rstrip("\n")
        i += 1
        if line == "end_header":
            break
        key, _, value = line.partition(" ")
        fields[key] = value
    else:
        raise DumpFormatError("unterminated header")
    try:
        meta = DumpMeta(
            run_id=fields["run_id"],
            entity=fields["entity"],
            role=fields.get("role", "-"),
            pid=int(fields.get("pid", 0)),
            scenario=fields.get("scenario", "-"),
            seed=int(fields.get("seed", 0)),
            levels=tuple(x for x in fields.get("levels", "").split(",") if x),
            scale_factor=float(fields.get("scale_factor", 1.0)),
        )
        calibration = ClockCalibration(
            wall_cost_ns=int(fields.get("wall_cost_ns", 0)),
            cpu_cost_ns=int(fields.get("cpu_cost_ns", 0)),
            cpu_refresh_wall_ns=int(fields.get("cpu_refresh_wall_ns", 0)),
            pair_overhead_ns=int(fields.get("pair_overhead_ns", 0)),
        )
    except (KeyError, ValueError) as exc:
        raise DumpFormatError(f"bad header field: {exc}") from exc
    return meta, calibration, i


def read_dump(path: Path | str) -> Dump:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    meta, calibration, i = _parse_header(lines)
    dump = Dump(meta=meta, calibration=calibration)
    while i < len(lines):
        line = lines[i]
        i += 1
        if line == "end_events":
            break
        parts = line.split("\t")
        code = parts[0]
        if code in ("E", "X"):
            _, thread, wall, cpu, file, lineno, symbol, kind, tag = parts
            dump.events.append(
                ProfileEvent(
                    thread_id=int(thread),
                    site=CodeSite(file, int(lineno), symbol, _CODE_KIND[kind]),
                    kind=EventKind.ENTER if code == "E" else EventKind.EXIT,
                    wall_ns=int(wall),
                    cpu_ns=int(cpu),
                    tag=None if tag == "-" else tag,
                )
            )
        elif code == "S":
            _, thread, wall, cpu, stack_str = parts
            stack = tuple(_parse_frame(f) for f in stack_str.split("|") if f)
            if not stack:
                continue
            dump.events.append(
                ProfileEvent(
                    thread_id=int(thread),
                    site=stack[-1],
                    kind=EventKind.SAMPLE,
                    wall_ns=int(wall),
                    cpu_ns=int(cpu),
                    stack=stack,
                )
            )
        elif code == "V":
            _, thread, wall, file, lineno, symbol, kind, detail = parts
            dump.violations.append(
                NestingViolation(
                    thread_id=int(thread),
                    wall_ns=int(wall),
                    site=CodeSite(file, int(lineno), symbol, _CODE_KIND[kind]),
                    detail=detail,
                )
            )
        else:
            raise DumpFormatError(f"unknown event record {code!r}")
    else:
        raise DumpFormatError("unterminated event section")
    for line in lines[i:]:
        if line.startswith("coarse\t"):
            _, elapsed, user, system = line.split("\t")
            dump.coarse = CoarseBreakdown(
                elapsed_s=float(elapsed), user_s=float(user), system_s=float(system)
            )
        elif line == "end_dump":
            return dump
    raise DumpFormatError("missing end_dump")
