"""Turn raw event streams into tabular profiles and merge them across processes."""

from planeprof.model.aggregate import (
    MalformedStream,
    UnknownScope,
    aggregate_functions,
    aggregate_regions,
    aggregate_threads,
    bracketed_span_ns,
    profile_from_dump,
)
from planeprof.model.merge import RunIdMismatch, merge_profiles
from planeprof.model.stats import (
    FunctionProfile,
    FunctionStats,
    RegionProfile,
    RegionStats,
    ThreadStats,
)

__all__ = [
    "FunctionProfile",
    "FunctionStats",
    "MalformedStream",
    "RegionProfile",
    "RegionStats",
    "RunIdMismatch",
    "ThreadStats",
    "UnknownScope",
    "aggregate_functions",
    "aggregate_regions",
    "aggregate_threads",
    "bracketed_span_ns",
    "merge_profiles",
    "profile_from_dump",
]
