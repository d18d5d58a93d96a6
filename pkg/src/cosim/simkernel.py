"""Discrete-event backbone shared by the world and network engines.

Simulation time is an ``int`` count of microseconds everywhere in the
package. Nothing converts it to a float except for display.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Any

SimTime = int

US_PER_MS = 1_000
US_PER_S = 1_000_000


def ms(value: int) -> SimTime:
    return value * US_PER_MS


def to_seconds(t: SimTime) -> float:
    return t / US_PER_S


class SchedulingInPast(RuntimeError):
    """An event was scheduled before the queue clock (engine bug)."""


class EventKind(enum.Enum):
    PACKET_ATTEMPT = "packet-attempt"
    ATTEMPT_END = "attempt-end"
    FORWARD = "forward"
    WINDOW_BOUNDARY = "window-boundary"
    AGENT_WAYPOINT = "agent-waypoint"
    METRICS_FLUSH = "metrics-flush"


@dataclass(frozen=True, slots=True)
class Event:
    fire_at: SimTime
    seq: int
    kind: EventKind
    data: Any = None


class EventQueue:
    """Min-heap of events ordered by ``(fire_at, seq)``.

    ``seq`` is a global insertion counter, so events scheduled for the same
    instant pop in the order they were scheduled.
    """

    def __init__(self, start: SimTime = 0) -> None:
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self.clock: SimTime = start

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, fire_at: SimTime, kind: EventKind, data: Any = None) -> Event:
        if fire_at < self.clock:
            raise SchedulingInPast(
                f"event {kind.value} at t={fire_at}us is before clock {self.clock}us"
            )
        ev = Event(fire_at, self._seq, kind, data)
        self._seq += 1
        heapq.heappush(self._heap, (fire_at, ev.seq, ev))
        return ev

    def peek_time(self) -> SimTime | None:
        return self._heap[0][0] if self._heap else None

    def pop_next(self) -> Event | None:
        """Remove and return the earliest event, or ``None`` when drained."""
        if not self._heap:
            return None
        fire_at, _, ev = heapq.heappop(self._heap)
        self.clock = fire_at
        return ev

    def advance_to(self, t: SimTime) -> None:
        """Move the clock forward without popping (window barrier)."""
        if t < self.clock:
            raise SchedulingInPast(f"cannot rewind clock from {self.clock}us to {t}us")
        if self._heap and self._heap[0][0] < t:
            raise SchedulingInPast(
                f"advancing to {t}us would skip an event at {self._heap[0][0]}us"
            )
        self.clock = t


@dataclass
class RngStream:
    """Named, independently seeded uniform stream.

    The generator state is derived from a SHA-256 digest of
    ``(seed, stream_id)``, so streams never share state and adding a new
    consumer does not shift anybody else's draws.
    """

    seed: int
    stream_id: str
    draws: int = 0
    _gen: random.Random = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        digest = hashlib.sha256(f"{self.seed}/{self.stream_id}".encode()).digest()
        self._gen = random.Random(int.from_bytes(digest, "big"))

    def draw_uniform(self) -> float:
        self.draws += 1
        return self._gen.random()
