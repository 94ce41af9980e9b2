"""Injectable clocks: virtual time for exact-cadence tests, wall time for demos."""

from __future__ import annotations

import time


class VirtualClock:
    """Time advances only when explicitly moved, never by itself."""

    def __init__(self, start: float = 0.0):
        self._now = start

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> float:
        if seconds < 0:
            raise ValueError("cannot move a clock backwards")
        self._now += seconds
        return self._now

    def advance_to(self, target: float) -> float:
        if target < self._now:
            raise ValueError("cannot move a clock backwards")
        self._now = target
        return self._now


class WallClock:
    """Monotonic wall clock; advance_to sleeps until the target."""

    def now(self) -> float:
        return time.monotonic()

    def advance_to(self, target: float) -> float:
        delay = target - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        return time.monotonic()
