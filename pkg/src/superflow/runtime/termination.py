"""Quiescence detection by double scan.

A scan is a candidate when every worker is idle, every inbox and deque is
empty and the global sent and received counts agree.  Deadlock is declared
only when two consecutive candidate scans see identical counters, so any
worker activity between the scans (which bumps its epoch) resets the test.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .machine import Machine


class TerminationDetector:
    def __init__(self, machine: "Machine"):
        self.machine = machine
        self.previous: tuple | None = None

    def snapshot(self) -> tuple | None:
        pes = self.machine.pes
        if not all(pe.idle for pe in pes):
            return None
        epochs = tuple(pe.epoch for pe in pes)
        sent = sum(pe.stats.sent for pe in pes)
        received = sum(pe.stats.received for pe in pes)
        if sent != received:
            return None
        if any(pe.inbox or pe.dq for pe in pes):
            return None
        if not all(pe.idle for pe in pes):
            return None
        return epochs, sent, received

    def scan(self) -> str:
        """Return ``stop``, ``deadlock`` or ``continue``.

        A run stops once it is quiescent after ``ret`` has fired, so work on
        branches that do not feed the result (writes, say) still completes.
        """
        snap = self.snapshot()
        if snap is not None and snap == self.previous:
            return "stop" if self.machine.returned else "deadlock"
        self.previous = snap
        return "continue"


def detect_termination(detector: TerminationDetector) -> str:
    return detector.scan()
