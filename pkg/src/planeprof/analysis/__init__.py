"""Percentage arithmetic, time-category classification and hotspot findings."""

from planeprof.analysis.categories import (
    CategoryBreakdown,
    CategoryRules,
    TimeCategory,
    classify,
    load_rules,
)
from planeprof.analysis.hotspots import (
    CategoryDelta,
    CompareReport,
    HotspotFinding,
    ScenarioMismatch,
    SiteDelta,
    compare,
    find_hotspots,
)
from planeprof.analysis.percentages import (
    CoarsePercentages,
    LengthMismatch,
    ShareReport,
    ZeroElapsed,
    ZeroRuntime,
    coarse_percentages,
    round_half_up,
    share_of_runtime,
)

__all__ = [
    "CategoryBreakdown",
    "CategoryDelta",
    "CategoryRules",
    "CoarsePercentages",
    "CompareReport",
    "HotspotFinding",
    "LengthMismatch",
    "ScenarioMismatch",
    "ShareReport",
    "SiteDelta",
    "TimeCategory",
    "ZeroElapsed",
    "ZeroRuntime",
    "classify",
    "coarse_percentages",
    "compare",
    "find_hotspots",
    "load_rules",
    "round_half_up",
    "share_of_runtime",
]
