"""Cooperative cancellation shared between the PDHG loop and crossover workers."""

from __future__ import annotations

import threading


class CancelFlag:
    """A one-shot flag that also remembers why it was raised."""

    def __init__(self):
        self._event = threading.Event()
        self._lock = threading.Lock()
        self.reason: str | None = None

    def cancel(self, reason: str = "cancelled") -> None:
        with self._lock:
            if self.reason is None:
                self.reason = reason
        self._event.set()

    def is_set(self) -> bool:
        return self._event.is_set()

    def __bool__(self) -> bool:
        return self._event.is_set()
