"""Aggregation: event streams to function, region and thread tables.

The walk keeps a frame stack per thread. Closing a frame attributes its
exclusive time (span minus direct children spans) to the site; inclusive
time accrues only for primitive activations, so recursive re-entries are
counted once. All arithmetic is on integer nanoseconds, which makes the
per-thread conservation identity exact: the exclusive times of a fully
bracketed stream telescope to the sum of its top-level spans.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from typing import Dict, Iterable, List, Optional, Sequence

from planeprof.instrument.dumpio import Dump
from planeprof.instrument.events import CodeSite, EventKind, ProfileEvent, SiteKind
from planeprof.model.stats import (
    FunctionProfile,
    FunctionStats,
    RegionProfile,
    RegionStats,
    ThreadStats,
)


class MalformedStream(Exception):
    """The stream cannot be repaired (clock regression within a thread)."""


class UnknownScope(Exception):
    """No activation of the requested function scope in the stream."""


def _by_thread(events: Iterable[ProfileEvent]) -> Dict[int, List[ProfileEvent]]:
    streams: Dict[int, List[ProfileEvent]] = defaultdict(list)
    for ev in events:
        if ev.kind is not EventKind.SAMPLE:
            streams[ev.thread_id].append(ev)
    return streams


class _Row:
    __slots__ = ("ncalls", "nprim", "tot_ns", "cum_ns", "tag")

    def __init__(self) -> None:
        self.ncalls = 0
        self.nprim = 0
        self.tot_ns = 0
        self.cum_ns = 0
        self.tag: Optional[str] = None


def _walk_thread(events: Sequence[ProfileEvent], rows: Dict[CodeSite, _Row]) -> int:
    """Aggregate one thread's bracket stream into ``rows``.

    Returns the bracketed span: the summed wall time of top-level frames.
    Unmatched brackets are dropped (theirs is the violation the recorder
    already flagged); a backwards wall clock is unrepairable.
    """
    frames: List[list] = []  # [site, enter_wall, child_ns, primitive, tag]
    open_count: Counter = Counter()
    top_span_ns = 0
    last_wall = None
    for ev in events:
        if last_wall is not None and ev.wall_ns < last_wall:
            raise MalformedStream(
                f"wall clock regressed on thread {ev.thread_id}: "
                f"{ev.wall_ns} < {last_wall}"
            )
        last_wall = ev.wall_ns
        if ev.kind is EventKind.ENTER:
            primitive = open_count[ev.site] == 0
            open_count[ev.site] += 1
            frames.append([ev.site, ev.wall_ns, 0, primitive, ev.tag])
        elif ev.kind is EventKind.EXIT:
            if not frames or frames[-1][0] != ev.site:
                continue  # repaired: recorded violation upstream
            site, enter_wall, child_ns, primitive, tag = frames.pop()
            open_count[site] -= 1
            span = ev.wall_ns - enter_wall
            row = rows.get(site)
            if row is None:
                row = rows[site] = _Row()
            row.ncalls += 1
            row.tot_ns += span - child_ns
            if primitive:
                row.nprim += 1
                row.cum_ns += span
            if row.tag is None and tag is not None:
                row.tag = tag
            if frames:
                frames[-1][2] += span
            else:
                top_span_ns += span
    return top_span_ns


def aggregate_functions(events: Iterable[ProfileEvent]) -> FunctionProfile:
    """Function table over all threads of one event stream."""
    rows: Dict[CodeSite, _Row] = {}
    span = 0
    for _, stream in sorted(_by_thread(events).items()):
        span += _walk_thread(stream, rows)
    profile = FunctionProfile(wall_span_ns=span)
    for site, row in rows.items():
        profile.rows[site] = FunctionStats(
            site=site,
            ncalls_total=row.ncalls,
            ncalls_primitive=row.nprim,
            tottime_ns=row.tot_ns,
            cumtime_ns=row.cum_ns,
            tag=row.tag,
        )
    return profile


def aggregate_threads(events: Iterable[ProfileEvent]) -> List[ThreadStats]:
    """Per-thread function rows (exclusive tsub, inclusive ttot)."""
    out: List[ThreadStats] = []
    for thread_id, stream in sorted(_by_thread(events).items()):
        rows: Dict[CodeSite, _Row] = {}
        _walk_thread(stream, rows)
        for site, row in rows.items():
            out.append(
                ThreadStats(
                    name=str(thread_id),
                    site=site,
                    ncall=row.ncalls,
                    tsub_ns=row.tot_ns,
                    ttot_ns=row.cum_ns,
                )
            )
    return out


def aggregate_regions(events: Iterable[ProfileEvent], scope: CodeSite) -> RegionProfile:
    """Region rows for statement blocks executed inside ``scope``.

    A region counts when its frame lies (at any depth) within an
    activation of the scope function; its share is taken against the
    scope's inclusive time. Regions directly inside a scope are expected
    to be disjoint, like source lines.
    """
    region_rows: Dict[CodeSite, list] = {}  # site -> [hits, time_ns]
    scope_time_ns = 0
    scope_seen = False
    for _, stream in sorted(_by_thread(events).items()):
        frames: List[list] = []
        scope_depth = 0
        open_scope: Counter = Counter()
        for ev in stream:
            if ev.kind is EventKind.ENTER:
                frames.append([ev.site, ev.wall_ns])
                if ev.site == scope:
                    scope_seen = True
                    scope_depth += 1
                    open_scope[ev.site] += 1
            elif ev.kind is EventKind.EXIT:
                if not frames or frames[-1][0] != ev.site:
                    continue
                site, enter_wall = frames.pop()
                span = ev.wall_ns - enter_wall
                if site == scope:
                    scope_depth -= 1
                    open_scope[site] -= 1
                    if open_scope[site] == 0:  # primitive scope activation
                        scope_time_ns += span
                elif scope_depth > 0 and site.kind is SiteKind.REGION:
                    row = region_rows.get(site)
                    if row is None:
                        row = region_rows[site] = [0, 0]
                    row[0] += 1
                    row[1] += span
    if not scope_seen:
        raise UnknownScope(f"no activation of {scope.label()} in stream")
    profile = RegionProfile(scope=scope, scope_time_ns=scope_time_ns)
    for site, (hits, time_ns) in region_rows.items():
        pct = 100.0 * time_ns / scope_time_ns if scope_time_ns > 0 else 0.0
        profile.rows[site] = RegionStats(site=site, hits=hits, time_ns=time_ns, pct_time=min(pct, 100.0))
    return profile


def bracketed_span_ns(events: Iterable[ProfileEvent]) -> Dict[int, int]:
    """Per-thread sum of top-level frame spans; the conservation baseline."""
    spans: Dict[int, int] = {}
    for thread_id, stream in sorted(_by_thread(events).items()):
        spans[thread_id] = _walk_thread(stream, {})
    return spans


def profile_from_dump(dump: Dump) -> FunctionProfile:
    """Aggregate a dump's events and attach its run identity."""
    profile = aggregate_functions(dump.events)
    return profile.with_meta(
        run_id=dump.meta.run_id,
        scenario=dump.meta.scenario,
        scale_factor=dump.meta.scale_factor,
        sources=(dump.meta.entity,),
    )
