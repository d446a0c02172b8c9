"""Dumbbell bottleneck: token-bucket shaping, drop-tail buffer, fixed delay.

Access links are infinitely fast; only the bottleneck between the two
switches shapes traffic. The shaper serializes packets at the configured
rate with a single-packet burst, so a packet enqueued on an idle link still
departs one full serialization time later, and back-to-back packets depart
exactly one serialization time apart. The configured round-trip is split as
symmetric propagation delay on each direction; queueing adds on top.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .engine import NS_PER_S, SimTime, Simulator

SEGMENT_WIRE_BYTES = 1500   # on-wire bytes of a full data segment
SEGMENT_PAYLOAD_BYTES = 1350  # application bytes carried by a full segment
HEADER_BYTES = SEGMENT_WIRE_BYTES - SEGMENT_PAYLOAD_BYTES
ACK_WIRE_BYTES = 40


class Packet:
    __slots__ = ("flow_id", "seq", "len", "is_ack", "sent_at", "pkt_num",
                 "acked_ranges", "largest_acked_pkt_num", "payload_len",
                 "is_handshake")

    def __init__(self, flow_id: int, seq: int, length: int, pkt_num: int,
                 is_ack: bool = False, sent_at: SimTime = 0,
                 payload_len: int = 0, is_handshake: bool = False):
        self.flow_id = flow_id
        self.seq = seq
        self.len = length
        self.is_ack = is_ack
        self.sent_at = sent_at
        self.pkt_num = pkt_num
        self.payload_len = payload_len
        self.is_handshake = is_handshake
        self.acked_ranges: list[tuple[int, int]] = []
        self.largest_acked_pkt_num = -1


@dataclass(frozen=True)
class LinkConfig:
    rate_bps: int
    prop_delay: SimTime          # one-way
    buffer_pkts: int
    burst_pkts: int = 1

    def __post_init__(self):
        if self.rate_bps <= 0:
            raise ValueError("rate must be positive")
        if self.buffer_pkts < 1 or self.burst_pkts < 1:
            raise ValueError("buffer_pkts and burst_pkts must be >= 1")

    def serialization_time(self, length: int) -> SimTime:
        # ceil so the realized rate never exceeds the configured one
        bits = length * 8
        return -(-bits * NS_PER_S // self.rate_bps)


@dataclass
class FlowCounters:
    injected: int = 0
    delivered: int = 0
    dropped: int = 0
    departed: int = 0
    injected_bytes: int = 0
    departed_bytes: int = 0


class Link:
    """One direction of the bottleneck: shaper, drop-tail queue, delay.

    Departure times are fixed at enqueue time from the shaper state, which
    keeps event counts linear in packets (no periodic refill events). The
    queue is FIFO by construction: departures are scheduled in enqueue
    order at strictly increasing times.
    """

    def __init__(self, sim: Simulator, config: LinkConfig, name: str = "bottleneck"):
        self.sim = sim
        self.config = config
        self.name = name
        self.busy_until: SimTime = 0
        self.queued = 0
        self.max_queued = 0
        self.counters: dict[int, FlowCounters] = {}
        self.deliver: Optional[Callable[[Packet, SimTime], None]] = None
        self.on_departure: Optional[Callable[[Packet, SimTime], None]] = None
        self.on_occupancy: Optional[Callable[[SimTime, int], None]] = None
        self.log_departures = False
        self.departures: list[tuple[SimTime, int, int]] = []  # (t, flow, len)
        # idle credit allows up to burst_pkts back-to-back full segments
        self._burst_credit = (config.burst_pkts - 1) * config.serialization_time(
            SEGMENT_WIRE_BYTES)

    def _flow(self, flow_id: int) -> FlowCounters:
        c = self.counters.get(flow_id)
        if c is None:
            c = self.counters[flow_id] = FlowCounters()
        return c

    def enqueue(self, packet: Packet, now: SimTime) -> Optional[SimTime]:
        """Admit a packet; returns its departure time, or None if dropped."""
        c = self._flow(packet.flow_id)
        c.injected += 1
        c.injected_bytes += packet.len
        if self.queued >= self.config.buffer_pkts:
            c.dropped += 1
            return None
        start = max(self.busy_until, now - self._burst_credit)
        departure = start + self.config.serialization_time(packet.len)
        self.busy_until = departure
        self.queued += 1
        if self.queued > self.max_queued:
            self.max_queued = self.queued
        if self.queued == 1 and self.on_occupancy is not None:
            self.on_occupancy(now, self.queued)
        self.sim.schedule(departure, "packet-departure", self.name,
                          self._depart, packet)
        return departure

    def _depart(self, packet: Packet, now: SimTime) -> None:
        self.queued -= 1
        c = self._flow(packet.flow_id)
        c.departed += 1
        c.departed_bytes += packet.len
        if self.log_departures:
            self.departures.append((now, packet.flow_id, packet.len))
        if self.on_departure is not None:
            self.on_departure(packet, now)
        if self.queued == 0 and self.on_occupancy is not None:
            self.on_occupancy(now, 0)
        arrive_at = now + self.config.prop_delay
        self.sim.schedule(arrive_at, "packet-arrival", self.name,
                          self._arrive, packet)

    def _arrive(self, packet: Packet, now: SimTime) -> None:
        self._flow(packet.flow_id).delivered += 1
        if self.deliver is not None:
            self.deliver(packet, now)


def link_utilization(link: Link, window: tuple[SimTime, SimTime]) -> float:
    """Bits per second departed within [start, end). Needs log_departures."""
    start, end = window
    if end <= start:
        raise ValueError(f"empty utilization window: [{start}, {end})")
    total = 0
    for t, _flow, length in link.departures:
        if start <= t < end:
            total += length
    return total * 8 * NS_PER_S / (end - start)
