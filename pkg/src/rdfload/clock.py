"""Clocks the driver and the test adapters can share."""
from __future__ import annotations

import threading


class VirtualClock:
    """Manually advanced monotonic clock.

    ``now`` is a drop-in for :func:`time.perf_counter` and ``sleep`` for
    :func:`time.sleep`, so a slow store can "take" hours without waiting.
    """

    def __init__(self, start: float = 0.0):
        self._t = float(start)
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self._t

    __call__ = now

    def sleep(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("cannot sleep a negative duration")
        with self._lock:
            self._t += seconds

    advance = sleep
