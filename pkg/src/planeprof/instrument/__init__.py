"""Raw timing evidence collection: events, recorder, sampler, process clocks."""

from planeprof.instrument.events import (
    CodeSite,
    EventKind,
    NestingViolation,
    ProfileEvent,
    SiteKind,
)
from planeprof.instrument.proctimes import CoarseBreakdown, ProcessNotFound, ProcessTimer
from planeprof.instrument.recorder import ClockCalibration, Recorder, calibrate_clocks
from planeprof.instrument.sampler import SampleRun, StackSampler, sample_shares

__all__ = [
    "ClockCalibration",
    "CoarseBreakdown",
    "CodeSite",
    "EventKind",
    "NestingViolation",
    "ProcessNotFound",
    "ProcessTimer",
    "ProfileEvent",
    "Recorder",
    "SampleRun",
    "SiteKind",
    "StackSampler",
    "calibrate_clocks",
    "sample_shares",
]
