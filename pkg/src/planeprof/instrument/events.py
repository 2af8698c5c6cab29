"""Event vocabulary shared by the recorder, dump files and aggregation.

A :class:`CodeSite` names a place in the code (file, line, symbol); a
:class:`ProfileEvent` is one timestamped observation at a site. Enter/Exit
pairs bracket function or region execution; Sample events carry a whole
stack captured by the statistical sampler.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple


class SiteKind(str, Enum):
    FUNCTION = "function"
    REGION = "region"
    BUILTIN = "builtin"


class EventKind(str, Enum):
    ENTER = "enter"
    EXIT = "exit"
    SAMPLE = "sample"


# Well-known tags attached by the instrumentation layer. Analysis gives
# tags precedence over site-name pattern rules, so blocking time never has
# to be guessed from symbols.
TAG_SLEEP = "sleep"
TAG_POLL = "poll"
TAG_HEARTBEAT = "heartbeat"
TAG_SPAWN = "spawn"


@dataclass(frozen=True)
class CodeSite:
    """A uniquely identified place in the code.

    ``(file, line, symbol)`` identifies a site within a run; ``kind`` says
    whether the site is a whole function, an inner statement region, or a
    builtin/runtime primitive.
    """

    file: str
    line: int
    symbol: str
    kind: SiteKind = SiteKind.FUNCTION

    def label(self) -> str:
        """Render as ``file:line(symbol)``, the table row key."""
        return f"{self.file}:{self.line}({self.symbol})"


@dataclass(frozen=True)
class ProfileEvent:
    """One observation: an enter, exit or stack sample.

    ``wall_ns`` comes from the process monotonic clock, ``cpu_ns`` from the
    per-thread CPU clock (possibly cached between refreshes, see
    :class:`planeprof.instrument.recorder.Recorder`). ``thread_id`` is the
    thread the event describes, which for samples differs from the thread
    that recorded it.
    """

    thread_id: int
    site: CodeSite
    kind: EventKind
    wall_ns: int
    cpu_ns: int
    tag: Optional[str] = None
    stack: Optional[Tuple[CodeSite, ...]] = None


@dataclass(frozen=True)
class NestingViolation:
    """An exit that did not match the innermost open enter.

    Violations are recorded, not raised: the stream stays parseable and
    aggregation drops only the offending bracket.
    """

    thread_id: int
    wall_ns: int
    site: CodeSite
    detail: str
