"""Deterministic discrete-event engine with an integer-nanosecond clock.

Every simulation run owns exactly one engine.  Events are dispatched in
(time, sequence_number) order; the sequence number is a global insertion
counter, so simultaneous events run in FIFO insertion order.  That rule is
what makes two runs of the same scenario and seed produce bit-identical
traces.
"""

from __future__ import annotations

import heapq
from enum import Enum
from typing import Callable, NamedTuple

# Nanoseconds since simulation start.  Plain int: Python ints cover the
# 64-bit range without overflow games.
SimTime = int

NS_PER_SEC = 1_000_000_000


class EventKind(Enum):
    PACKET_ARRIVAL = "packet-arrival"
    PACKET_DEPARTURE = "packet-departure"
    TIMER_EXPIRY = "timer-expiry"
    APP_SEND = "app-send"
    ITERATION_START = "iteration-start"


class Event(NamedTuple):
    """Dispatched-event record, as it appears in the engine trace."""

    time: SimTime
    sequence_number: int
    kind: EventKind


class SchedulingError(RuntimeError):
    """An event was scheduled in the past.  Always a programming error."""


class SimulationError(RuntimeError):
    """A runtime invariant of the simulation was violated."""


class Engine:
    """Single-threaded event loop.  Not shared between runs."""

    def __init__(self, trace: bool = False):
        self.now: SimTime = 0
        self._heap: list = []
        self._next_seq = 0
        # Optional dispatch trace for determinism checks; off by default
        # because it grows with the event count.
        self.trace: list[Event] | None = [] if trace else None

    def schedule(self, time: SimTime, kind: EventKind, fn: Callable, *args) -> int:
        """Queue fn(*args) to run at `time`.  Returns the sequence number."""
        if time < self.now:
            raise SchedulingError(
                f"cannot schedule {kind.value} at t={time}ns: clock is already at {self.now}ns"
            )
        seq = self._next_seq
        self._next_seq = seq + 1
        heapq.heappush(self._heap, (time, seq, kind, fn, args))
        return seq

    def run_until(self, t: SimTime) -> None:
        """Dispatch every event with time <= t, then set the clock to t."""
        if t < self.now:
            raise SchedulingError(f"run_until({t}) but clock is already at {self.now}")
        heap = self._heap
        trace = self.trace
        while heap and heap[0][0] <= t:
            time, seq, kind, fn, args = heapq.heappop(heap)
            self.now = time
            if trace is not None:
                trace.append(Event(time, seq, kind))
            fn(*args)
        self.now = t

    def run_until_idle(self, limit: SimTime | None = None) -> None:
        """Dispatch events until the queue drains (or `limit` is reached)."""
        heap = self._heap
        trace = self.trace
        while heap:
            if limit is not None and heap[0][0] > limit:
                self.now = limit
                return
            time, seq, kind, fn, args = heapq.heappop(heap)
            self.now = time
            if trace is not None:
                trace.append(Event(time, seq, kind))
            fn(*args)

    def pending(self) -> int:
        return len(self._heap)
