"""Deterministic discrete-event simulation core.

The virtual clock is an integer nanosecond counter; all scheduling
arithmetic stays in exact integers so a run is reproducible bit for bit.
Events are totally ordered by (fire_at, scheduling sequence number).
"""

from __future__ import annotations

import hashlib
import heapq
import random
from typing import Callable, Optional

SimTime = int  # nanoseconds since simulation start

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000


def us(n: float) -> SimTime:
    return int(n * NS_PER_US)


def ms(n: float) -> SimTime:
    return int(n * NS_PER_MS)


def seconds(n: float) -> SimTime:
    return int(n * NS_PER_S)


# Closed set of event kinds; new behaviors ride in the callback payload,
# never in new queue semantics.
EVENT_KINDS = (
    "packet-arrival",
    "packet-departure",
    "pacing-timer",
    "loss-timer",
    "app-start",
    "sim-end",
)


class Event:
    """A scheduled callback with a total-order key and a cancel flag.

    Heap ordering lives in the (fire_at, seq) tuple key the simulator
    pushes, so Event itself never gets compared.
    """

    __slots__ = ("fire_at", "seq", "kind", "target", "fn", "arg", "cancelled")

    def __init__(self, fire_at: SimTime, seq: int, kind: str, target: str,
                 fn: Callable, arg: object):
        self.fire_at = fire_at
        self.seq = seq
        self.kind = kind
        self.target = target
        self.fn = fn
        self.arg = arg
        self.cancelled = False

    def cancel(self) -> bool:
        """Mark the event dead. Returns False if it already fired."""
        if self.fire_at == -1 or self.cancelled:
            return False
        self.cancelled = True
        return True


class Simulator:
    """Single-threaded event loop over an integer-nanosecond clock."""

    def __init__(self, record_trace: bool = False):
        self.now: SimTime = 0
        self._heap: list[tuple[SimTime, int, Event]] = []
        self._seq = 0
        self.scheduled = 0
        self.cancelled = 0
        self.dispatched = 0
        self._stop = False
        self.record_trace = record_trace
        self.trace: list[tuple[SimTime, int, str, str]] = []

    def schedule(self, fire_at: SimTime, kind: str, target: str,
                 fn: Callable, arg: object = None) -> Event:
        """Schedule fn(now) (or fn(arg, now) when arg is given) at fire_at."""
        if fire_at < self.now:
            raise RuntimeError(
                f"scheduled in the past: fire_at={fire_at} now={self.now}")
        ev = Event(fire_at, self._seq, kind, target, fn, arg)
        heapq.heappush(self._heap, (fire_at, self._seq, ev))
        self._seq += 1
        self.scheduled += 1
        return ev

    def cancel(self, ev: Event) -> bool:
        if ev.cancel():
            self.cancelled += 1
            return True
        return False

    def stop(self) -> None:
        """Request the current run_until() call to return after this event."""
        self._stop = True

    def run_until(self, end: Optional[SimTime]) -> int:
        """Dispatch every event with fire_at <= end (all events if None).

        The clock finishes at `end` when given, even if the queue drains
        earlier; with end=None it rests at the last dispatched event.
        Returns the number of events dispatched by this call.
        """
        self._stop = False
        count = 0
        heap = self._heap
        pop = heapq.heappop
        while heap:
            fire_at = heap[0][0]
            if end is not None and fire_at > end:
                break
            _, _, ev = pop(heap)
            if ev.cancelled:
                continue
            self.now = fire_at
            ev.fire_at = -1  # consumed; cancel() becomes a no-op
            if self.record_trace:
                self.trace.append((fire_at, ev.seq, ev.kind, ev.target))
            self.dispatched += 1
            count += 1
            if ev.arg is None:
                ev.fn(fire_at)
            else:
                ev.fn(ev.arg, fire_at)
            if self._stop:
                return count
        if end is not None and end > self.now:
            self.now = end
        return count


def derive_seed(base: int, *labels: object) -> int:
    """Stable 64-bit substream seed from a base seed and a label path.

    Hash-based so that streams for different (scenario, size, rep, role)
    tuples are independent, and identical inputs give identical streams on
    every platform.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(base).encode())
    for label in labels:
        h.update(b"|")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "big")


def substream(base: int, *labels: object) -> random.Random:
    """A deterministic RNG stream for the given label path."""
    return random.Random(derive_seed(base, *labels))
