"""Reliable QUIC-like sender and receiver over the simulated network.

One Connection owns one direction of data: it packetizes the application
bytes, paces them under the congestion controller's window, detects losses
RACK-style (packet-number and time thresholds against the largest
acknowledged packet), retransmits with fresh packet numbers, and records
the counters the experiment harness reads off at the end.

The connection handshake is modeled as a single round-trip of pure delay
before data flows; it supplies the first RTT sample (and the minimum RTT a
Blitzstart window is derived from) and is included in the flow completion
time for every variant alike.
"""

from __future__ import annotations

import bisect
from collections import OrderedDict, deque
from fractions import Fraction
from typing import Callable, Optional

from .congestion import CubicController, Mode
from .engine import NS_PER_MS, Event, SimTime, Simulator
from .netmodel import (ACK_WIRE_BYTES, HEADER_BYTES, SEGMENT_PAYLOAD_BYTES,
                       SEGMENT_WIRE_BYTES, Link, Packet)

RACK_PACKET_THRESHOLD = 3
RACK_TIME_THRESHOLD = Fraction(9, 8)
ACK_EVERY = 2
MAX_ACK_DELAY = 25 * NS_PER_MS


def pacing_interval(cwnd_bytes: int, srtt: SimTime, fraction: Fraction,
                    segment_bytes: int = SEGMENT_WIRE_BYTES) -> SimTime:
    """Gap between paced segments: spread cwnd over fraction * srtt."""
    if srtt <= 0:
        raise ValueError("srtt must be positive")
    if cwnd_bytes < segment_bytes:
        raise ValueError("cwnd below one segment")
    return (fraction.numerator * srtt * segment_bytes) // (
        fraction.denominator * cwnd_bytes)


class RangeSet:
    """Sorted disjoint half-open byte ranges with coverage accounting."""

    def __init__(self):
        self.ranges: list[tuple[int, int]] = []
        self.total = 0

    def add(self, start: int, end: int) -> list[tuple[int, int]]:
        """Insert [start, end); returns the newly covered subranges."""
        if end <= start:
            return []
        ranges = self.ranges
        if ranges:
            # frontier extension and already-covered are the hot cases
            last_start, last_end = ranges[-1]
            if start == last_end:
                ranges[-1] = (last_start, end)
                self.total += end - start
                return [(start, end)]
            i = bisect.bisect_right(ranges, (start, end))
            if i > 0 and ranges[i - 1][0] <= start and end <= ranges[i - 1][1]:
                return []
            if i < len(ranges) and ranges[i][0] <= start and end <= ranges[i][1]:
                return []
        added: list[tuple[int, int]] = []
        out: list[tuple[int, int]] = []
        cursor = start
        placed = False
        for s, e in self.ranges:
            if e < start or s > end:
                out.append((s, e))
                continue
            # overlaps or touches [start, end)
            if cursor < s:
                added.append((cursor, min(s, end)))
            cursor = max(cursor, e)
            start = min(start, s)
            end = max(end, e)
        if cursor < end:
            added.append((cursor, end))
        out.append((start, end))
        out.sort()
        # merge touching neighbours produced by the union
        merged: list[tuple[int, int]] = []
        for s, e in out:
            if merged and s <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], e))
            else:
                merged.append((s, e))
        self.ranges = merged
        self.total += sum(e - s for s, e in added)
        return added

    def covers(self, start: int, end: int) -> bool:
        for s, e in self.ranges:
            if s <= start and end <= e:
                return True
            if s > start:
                break
        return False

    def subtract_from(self, start: int, end: int) -> list[tuple[int, int]]:
        """Parts of [start, end) not yet covered."""
        holes: list[tuple[int, int]] = []
        cursor = start
        for s, e in self.ranges:
            if e <= cursor:
                continue
            if s >= end:
                break
            if cursor < s:
                holes.append((cursor, min(s, end)))
            cursor = max(cursor, e)
            if cursor >= end:
                break
        if cursor < end:
            holes.append((cursor, end))
        return holes


class SentRecord:
    __slots__ = ("pkt_num", "seq_start", "seq_end", "payload_len", "wire_len",
                 "sent_at", "is_retx", "acked", "lost")

    def __init__(self, pkt_num: int, seq_start: int, seq_end: int,
                 wire_len: int, sent_at: SimTime, is_retx: bool):
        self.pkt_num = pkt_num
        self.seq_start = seq_start
        self.seq_end = seq_end
        self.payload_len = seq_end - seq_start
        self.wire_len = wire_len
        self.sent_at = sent_at
        self.is_retx = is_retx
        self.acked = False
        self.lost = False


class Receiver:
    """Receiving endpoint: tracks byte ranges, generates ACKs."""

    def __init__(self, conn: "Connection"):
        self.conn = conn
        self.ranges = RangeSet()
        self.largest_pkt_num = -1
        self._pending = 0
        self._ack_timer: Optional[Event] = None
        self._ack_pkt_num = 0
        self.acks_sent = 0
        self.ack_bytes_sent = 0

    def on_data(self, pkt: Packet, now: SimTime) -> None:
        self.ranges.add(pkt.seq, pkt.seq + pkt.payload_len)
        if pkt.pkt_num > self.largest_pkt_num:
            self.largest_pkt_num = pkt.pkt_num
        conn = self.conn
        if conn.trace is not None:
            conn.trace(now, conn.flow_id, "deliver", pkt.pkt_num, pkt.seq,
                       pkt.len)
        self._pending += 1
        if self._pending >= ACK_EVERY:
            self._emit_ack(now)
        elif self._ack_timer is None:
            self._ack_timer = conn.sim.schedule(
                now + MAX_ACK_DELAY, "pacing-timer", f"recv:{conn.flow_id}",
                self._on_ack_timer)

    def _on_ack_timer(self, now: SimTime) -> None:
        self._ack_timer = None
        if self._pending > 0:
            self._emit_ack(now)

    def _emit_ack(self, now: SimTime) -> None:
        conn = self.conn
        if self._ack_timer is not None:
            conn.sim.cancel(self._ack_timer)
            self._ack_timer = None
        self._pending = 0
        ack = Packet(conn.flow_id, 0, ACK_WIRE_BYTES, self._ack_pkt_num,
                     is_ack=True, sent_at=now)
        self._ack_pkt_num += 1
        ack.acked_ranges = list(self.ranges.ranges)
        ack.largest_acked_pkt_num = self.largest_pkt_num
        self.acks_sent += 1
        self.ack_bytes_sent += ACK_WIRE_BYTES
        # reverse path: fixed propagation only, never congested or dropped
        conn.sim.schedule(now + conn.reverse_delay, "packet-arrival",
                          f"conn:{conn.flow_id}", conn.on_ack, ack)


class Connection:
    """Sending endpoint of one flow."""

    def __init__(self, sim: Simulator, flow_id: int, link: Link,
                 transfer_bytes: int,
                 controller_factory: Callable[[SimTime, SimTime], CubicController],
                 jitter: Optional[Callable[[], int]] = None,
                 trace: Optional[Callable] = None):
        self.sim = sim
        self.flow_id = flow_id
        self.link = link
        self.size = transfer_bytes
        self.reverse_delay = link.config.prop_delay
        self.handshake_rtt = 2 * link.config.prop_delay
        self.controller_factory = controller_factory
        self.controller: Optional[CubicController] = None
        self.jitter = jitter
        self.trace = trace

        self.next_seq = 0
        self.next_pkt_num = 0
        self.records: dict[int, SentRecord] = {}
        self.records_by_seq: dict[int, list[SentRecord]] = {}
        self.unacked: "OrderedDict[int, SentRecord]" = OrderedDict()
        self.retx_queue: deque[tuple[int, int]] = deque()
        self.acked_ranges = RangeSet()
        self.in_flight = 0

        self.srtt: Optional[SimTime] = None
        self.rttvar: SimTime = 0
        self.min_rtt: Optional[SimTime] = None
        self.latest_rtt: SimTime = 0
        self.largest_acked_pkt = -1
        self.largest_acked_sent_at: SimTime = 0

        self.burst_remaining = 0
        self.next_release: SimTime = 0
        self._pacing_event: Optional[Event] = None
        self._pto_event: Optional[Event] = None
        self._pto_backoff = 0
        self._last_inject: SimTime = 0

        self.bytes_acked = 0
        self.bytes_lost = 0
        self.bytes_retransmitted = 0
        self.lost_pkts = 0
        self.pkts_sent = 0
        self.payload_sent = 0
        self.acks_received = 0
        self.ack_anomalies = 0
        self.start_at: Optional[SimTime] = None
        self.data_start_at: Optional[SimTime] = None
        self.finished_at: Optional[SimTime] = None
        self.on_finished: Optional[Callable[[SimTime], None]] = None
        self.cwnd_log: Optional[list[tuple[SimTime, int, Mode]]] = None

        self.receiver = Receiver(self)

    # -- life cycle ---------------------------------------------------------

    def start(self, now: SimTime) -> None:
        self.start_at = now
        self.sim.schedule(now + self.handshake_rtt, "app-start",
                          f"conn:{self.flow_id}", self._on_handshake_done)

    def _on_handshake_done(self, now: SimTime) -> None:
        sample = self.handshake_rtt
        self.srtt = sample
        self.rttvar = sample // 2
        self.min_rtt = sample
        self.latest_rtt = sample
        self.controller = self.controller_factory(sample, now)
        self.burst_remaining = self.controller.initial_burst
        self.data_start_at = now
        self.maybe_send(now)

    @property
    def finished(self) -> bool:
        return self.finished_at is not None

    @property
    def fct(self) -> Optional[SimTime]:
        if self.finished_at is None or self.start_at is None:
            return None
        return self.finished_at - self.start_at

    # -- sending ------------------------------------------------------------

    def _next_chunk(self) -> Optional[tuple[int, int, bool]]:
        """(seq_start, seq_end, is_retx) of the next packet, or None."""
        while self.retx_queue:
            start, end = self.retx_queue.popleft()
            holes = self.acked_ranges.subtract_from(start, end)
            if not holes:
                continue
            h_start, h_end = holes[0]
            chunk_end = min(h_end, h_start + SEGMENT_PAYLOAD_BYTES)
            leftovers = holes[1:]
            if chunk_end < h_end:
                leftovers = [(chunk_end, h_end)] + leftovers
            for rng in reversed(leftovers):
                self.retx_queue.appendleft(rng)
            return h_start, chunk_end, True
        if self.next_seq < self.size:
            start = self.next_seq
            end = min(self.size, start + SEGMENT_PAYLOAD_BYTES)
            return start, end, False
        return None

    def maybe_send(self, now: SimTime) -> int:
        """Release packets while data, window, and pacer all permit."""
        if self.finished or self.controller is None:
            return 0
        sent = 0
        while True:
            chunk = self._next_chunk()
            if chunk is None:
                break
            start, end, is_retx = chunk
            wire = (end - start) + HEADER_BYTES
            if self.in_flight + wire > self.controller.cwnd:
                # window-limited: progress resumes on the next ACK
                if is_retx:
                    self.retx_queue.appendleft((start, end))
                break
            if self.burst_remaining > 0:
                self.burst_remaining -= 1
                self._send_range(start, end, is_retx, now)
                sent += 1
                if self.burst_remaining == 0:
                    self.next_release = now + self._interval()
                continue
            if self.next_release <= now:
                self._send_range(start, end, is_retx, now)
                sent += 1
                self.next_release = now + self._interval()
                continue
            # pacer gate closed; a retransmit chunk goes back to the queue,
            # new data simply stays at next_seq
            if is_retx:
                self.retx_queue.appendleft((start, end))
            if self._pacing_event is None:
                self._pacing_event = self.sim.schedule(
                    self.next_release, "pacing-timer", f"conn:{self.flow_id}",
                    self._on_pacing_timer)
            break
        return sent

    def _interval(self) -> SimTime:
        assert self.controller is not None and self.srtt is not None
        return pacing_interval(self.controller.cwnd, self.srtt,
                               self.controller.pacing_fraction(),
                               self.controller.params.segment_bytes)

    def _on_pacing_timer(self, now: SimTime) -> None:
        self._pacing_event = None
        self.maybe_send(now)

    def _send_range(self, start: int, end: int, is_retx: bool,
                    now: SimTime) -> None:
        inject_at = now
        if self.jitter is not None:
            inject_at += self.jitter()
        if inject_at < self._last_inject:
            inject_at = self._last_inject  # a sender never reorders itself
        self._last_inject = inject_at
        pkt_num = self.next_pkt_num
        self.next_pkt_num += 1
        wire = (end - start) + HEADER_BYTES
        rec = SentRecord(pkt_num, start, end, wire, inject_at, is_retx)
        self.records[pkt_num] = rec
        self.records_by_seq.setdefault(start, []).append(rec)
        self.unacked[pkt_num] = rec
        self.in_flight += wire
        self.pkts_sent += 1
        self.payload_sent += end - start
        if is_retx:
            self.bytes_retransmitted += end - start
        else:
            self.next_seq = max(self.next_seq, end)
        pkt = Packet(self.flow_id, start, wire, pkt_num, sent_at=inject_at,
                     payload_len=end - start)
        self.sim.schedule(inject_at, "packet-arrival", self.link.name,
                          self._inject, pkt)
        if self._pto_event is None:
            self._arm_pto(now)

    def _inject(self, pkt: Packet, now: SimTime) -> None:
        if self.trace is not None:
            self.trace(now, self.flow_id, "send", pkt.pkt_num, pkt.seq,
                       pkt.len)
        departure = self.link.enqueue(pkt, now)
        if departure is None and self.trace is not None:
            self.trace(now, self.flow_id, "drop", pkt.pkt_num, pkt.seq,
                       pkt.len)

    # -- receiving ----------------------------------------------------------

    def on_ack(self, ack: Packet, now: SimTime) -> None:
        if self.finished:
            return
        self.acks_received += 1
        if self.trace is not None:
            self.trace(now, self.flow_id, "ack", ack.largest_acked_pkt_num,
                       0, ack.len)
        largest = ack.largest_acked_pkt_num
        rec = self.records.get(largest)
        rtt_sample: Optional[SimTime] = None
        if rec is None:
            self.ack_anomalies += 1
        elif largest > self.largest_acked_pkt:
            rtt_sample = now - rec.sent_at
            self._update_rtt(rtt_sample)
            self.largest_acked_pkt = largest
            self.largest_acked_sent_at = rec.sent_at

        newly = 0
        newly_wire = 0
        for start, end in ack.acked_ranges:
            for added_start, added_end in self.acked_ranges.add(start, end):
                newly += added_end - added_start
                newly_wire += self._mark_acked(added_start, added_end)
        self.bytes_acked += newly

        if self.controller is not None:
            # the window is accounted in on-wire bytes, so growth follows
            # the wire bytes of the packets the ACK newly covered
            self.controller.on_ack(newly_wire, rtt_sample, now,
                                   self.largest_acked_pkt,
                                   self.next_pkt_num - 1, srtt=self.srtt)
            if self.cwnd_log is not None:
                self.cwnd_log.append((now, self.controller.cwnd,
                                      self.controller.mode))
        self._detect_losses(now)

        if self.bytes_acked >= self.size:
            self._finish(now)
            return
        if newly > 0:
            self._pto_backoff = 0
        if self.in_flight > 0:
            self._arm_pto(now)
        elif self._pto_event is not None:
            self.sim.cancel(self._pto_event)
            self._pto_event = None
        self.maybe_send(now)

    def _update_rtt(self, sample: SimTime) -> None:
        self.latest_rtt = sample
        if self.srtt is None:
            self.srtt = sample
            self.rttvar = sample // 2
            self.min_rtt = sample
            return
        self.rttvar = (3 * self.rttvar + abs(self.srtt - sample)) // 4
        self.srtt = (7 * self.srtt + sample) // 8
        if self.min_rtt is None or sample < self.min_rtt:
            self.min_rtt = sample

    def _mark_acked(self, start: int, end: int) -> int:
        """Mark covered records acked; returns their wire bytes (once each).

        Newly covered ranges land on the packetization grid, so every
        record they cover starts at a multiple of the segment payload.
        Retransmitted copies of an already-counted range add nothing.
        """
        first = start - (start % SEGMENT_PAYLOAD_BYTES)
        if first < start:
            first += SEGMENT_PAYLOAD_BYTES
        wire = 0
        for seq in range(first, end, SEGMENT_PAYLOAD_BYTES):
            counted = False
            for rec in self.records_by_seq.get(seq, ()):
                if not rec.acked and rec.seq_end <= end:
                    rec.acked = True
                    if not counted:
                        wire += rec.wire_len
                        counted = True
                    if not rec.lost:
                        self.in_flight -= rec.wire_len
        return wire

    # -- loss detection -------------------------------------------------------

    def _detect_losses(self, now: SimTime) -> list[int]:
        """RACK-style scan against the largest acknowledged packet."""
        if self.largest_acked_pkt < 0 or self.srtt is None:
            return []
        threshold = (RACK_TIME_THRESHOLD.numerator
                     * max(self.srtt, self.latest_rtt)
                     // RACK_TIME_THRESHOLD.denominator)
        time_cutoff = self.largest_acked_sent_at - threshold
        pkt_cutoff = self.largest_acked_pkt - RACK_PACKET_THRESHOLD
        lost: list[int] = []
        unacked = self.unacked
        while unacked:
            pkt_num, rec = next(iter(unacked.items()))
            if rec.acked or rec.lost:
                unacked.popitem(last=False)
                continue
            if rec.pkt_num <= pkt_cutoff or rec.sent_at <= time_cutoff:
                unacked.popitem(last=False)
                self._declare_lost(rec, now)
                lost.append(rec.pkt_num)
                continue
            break
        return lost

    def _declare_lost(self, rec: SentRecord, now: SimTime) -> None:
        rec.lost = True
        self.in_flight -= rec.wire_len
        self.bytes_lost += rec.payload_len
        self.lost_pkts += 1
        holes = self.acked_ranges.subtract_from(rec.seq_start, rec.seq_end)
        for hole in holes:
            self.retx_queue.append(hole)
        if self.controller is not None:
            self.controller.on_congestion_event(now, rec.pkt_num,
                                                self.next_pkt_num - 1)

    # -- probe timeout ----------------------------------------------------------

    def _pto_interval(self) -> SimTime:
        assert self.srtt is not None
        return (2 * self.srtt + 4 * self.rttvar) << self._pto_backoff

    def _arm_pto(self, now: SimTime) -> None:
        if self._pto_event is not None:
            self.sim.cancel(self._pto_event)
        self._pto_event = self.sim.schedule(
            now + self._pto_interval(), "loss-timer", f"conn:{self.flow_id}",
            self._on_pto)

    def _on_pto(self, now: SimTime) -> None:
        self._pto_event = None
        if self.finished:
            return
        oldest: Optional[SentRecord] = None
        while self.unacked:
            pkt_num, rec = next(iter(self.unacked.items()))
            if rec.acked or rec.lost:
                self.unacked.popitem(last=False)
                continue
            oldest = rec
            break
        if oldest is None:
            return
        self.unacked.popitem(last=False)
        self._declare_lost(oldest, now)
        self._pto_backoff += 1
        self._arm_pto(now)
        self.maybe_send(now)

    def _finish(self, now: SimTime) -> None:
        self.finished_at = now
        for ev in (self._pacing_event, self._pto_event):
            if ev is not None:
                self.sim.cancel(ev)
        self._pacing_event = None
        self._pto_event = None
        if self.on_finished is not None:
            self.on_finished(now)
