"""Merge per-process profiles from one run into a single table.

Only durations and counts are summed; wall timestamps from different
processes are never compared. Provenance (which entities contributed) is
kept on the merged profile.
"""

from __future__ import annotations

from typing import Sequence

from planeprof.model.stats import FunctionProfile


class RunIdMismatch(Exception):
    """Profiles come from different runs and must not be merged."""


def merge_profiles(profiles: Sequence[FunctionProfile]) -> FunctionProfile:
    """Field-wise sum of per-site stats across profiles of one run."""
    if not profiles:
        raise ValueError("nothing to merge")
    run_id = profiles[0].run_id
    for p in profiles[1:]:
        if p.run_id != run_id:
            raise RunIdMismatch(f"run {p.run_id!r} != {run_id!r}")
    merged = FunctionProfile(
        run_id=run_id,
        scenario=profiles[0].scenario,
        scale_factor=profiles[0].scale_factor,
    )
    sources: list[str] = []
    span = 0
    for p in profiles:
        sources.extend(p.sources)
        span += p.wall_span_ns
        for site, stats in p.rows.items():
            present = merged.rows.get(site)
            merged.rows[site] = stats if present is None else present.plus(stats)
    merged.sources = tuple(sources)
    merged.wall_span_ns = span
    return merged
