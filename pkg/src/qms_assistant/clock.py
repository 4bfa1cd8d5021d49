"""Injectable time source.

All modules take a Clock so tests and the CLI/API parity suite can run
with fully deterministic timestamps.
"""

from __future__ import annotations

import datetime as dt
from typing import Callable

Clock = Callable[[], str]


def utc_now_iso() -> str:
    """Wall-clock ISO-8601 UTC timestamp with microseconds."""
    return dt.datetime.now(dt.timezone.utc).isoformat().replace("+00:00", "Z")


class TickingClock:
    """Deterministic clock: starts at a fixed instant, advances a fixed step per call."""

    def __init__(self, start: str = "2025-01-01T00:00:00Z", step_seconds: float = 1.0):
        self._t = dt.datetime.fromisoformat(start.replace("Z", "+00:00"))
        self._step = dt.timedelta(seconds=step_seconds)

    def __call__(self) -> str:
        stamp = self._t.isoformat().replace("+00:00", "Z")
        self._t += self._step
        return stamp
