"""Congestion controllers: Cubic with Slow Start, and Blitzstart.

Blitzstart skips Slow Start entirely: the congestion window is seeded from
a client-signalled bandwidth estimate times the minimum RTT (the
bandwidth-delay product, optionally scaled by a per-access-technology
overestimation factor) and the connection begins directly in congestion
avoidance.

Cubic windows are computed in segments and seconds and converted to bytes
at the boundary. cwnd never drops below two segments.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .engine import NS_PER_MS, NS_PER_S, SimTime
from .netmodel import SEGMENT_WIRE_BYTES
from .signaling import AccessTech, BandwidthHint


class Mode(enum.Enum):
    SLOW_START = "slow-start"
    AVOIDANCE = "congestion-avoidance"
    RECOVERY = "recovery"


PACE_SLOW_START = Fraction(1, 2)
PACE_AVOIDANCE = Fraction(3, 4)


@dataclass(frozen=True)
class CubicParams:
    c: float = 0.4                 # segments per second cubed
    beta: float = 0.7              # multiplicative decrease
    initial_window_segments: int = 32
    initial_burst_packets: int = 10
    segment_bytes: int = SEGMENT_WIRE_BYTES

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError("beta must be in (0, 1)")
        if self.c <= 0:
            raise ValueError("c must be positive")

    @property
    def floor_bytes(self) -> int:
        return 2 * self.segment_bytes

    @property
    def initial_window_bytes(self) -> int:
        return self.initial_window_segments * self.segment_bytes


DEFAULT_PARAMS = CubicParams()

# Per-access-technology window scaling presets. The default applies no
# scaling anywhere; the mobile preset leans on deep buffers.
OVERESTIMATE_DEFAULT: dict[AccessTech, float] = {}
OVERESTIMATE_MOBILE: dict[AccessTech, float] = {
    AccessTech.THREE_G: 1.5,
    AccessTech.LTE: 1.5,
}


@dataclass(frozen=True)
class BlitzstartConfig:
    hint: BandwidthHint
    overestimate_factor: float = 1.0
    pace_all: bool = False  # sensitivity knob: no initial burst, pace from t=0

    def __post_init__(self):
        if self.overestimate_factor <= 0:
            raise ValueError("overestimate_factor must be positive")


def cubic_k_seconds(w_max_segments: float, params: CubicParams = DEFAULT_PARAMS) -> float:
    """Time to return to w_max after a multiplicative decrease."""
    return (w_max_segments * (1.0 - params.beta) / params.c) ** (1.0 / 3.0)


def cubic_window_segments(t_seconds: float, w_max_segments: float,
                          k_seconds: float,
                          params: CubicParams = DEFAULT_PARAMS) -> float:
    """W(t) = C*(t - K)^3 + W_max, in segments."""
    return params.c * (t_seconds - k_seconds) ** 3 + w_max_segments


def reno_friendly_segments(t_seconds: float, w_max_segments: float,
                           srtt_seconds: float,
                           params: CubicParams = DEFAULT_PARAMS) -> float:
    """Linear-growth floor emulating a standard AIMD flow.

    Keeps small windows growing roughly one segment per few round trips
    where the cubic term would idle on its plateau; without it, short
    flows stall for seconds and then probe explosively.
    """
    alpha = 3.0 * (1.0 - params.beta) / (1.0 + params.beta)
    return w_max_segments * params.beta + alpha * t_seconds / srtt_seconds


# Slow Start delay-exit calibration: a sample counts as delay-inflated when
# it exceeds the minimum RTT by max(floor, min_rtt/HYSTART_DIVISOR); the
# controller leaves Slow Start after HYSTART_SAMPLES such samples within one
# round. Calibrated so a lone flow exits while the bottleneck's rolling
# utilization is still below capacity (detection lags the first queueing by
# a full round trip, so the threshold must catch the early transient queue)
# while a flow entering a busy bottleneck still exits within its first round.
# On slow links a few packets of pacing granularity already produce several
# milliseconds of delay noise, so deployments raise the floor to a handful
# of serialization times (see ScenarioConfig.hystart_floor).
HYSTART_FLOOR = 2 * NS_PER_MS
HYSTART_DIVISOR = 25
HYSTART_SAMPLES = 8
# serialization times a calibrated floor tolerates: one initial burst's
# worth of self-queueing (the burst parks burst-1 packets behind the first)
HYSTART_FLOOR_PKTS = 9


def slow_start_exit_decision(round_min_sample: SimTime, min_rtt: SimTime,
                             samples_in_round: int,
                             floor: SimTime = HYSTART_FLOOR) -> bool:
    """Delay-increase exit rule for one completed round of RTT samples.

    Exit when enough samples were seen and the smallest of them still sits
    a full threshold above the minimum RTT. The incremental controller rule
    (count delay-inflated samples) exits whenever this round-level test
    would, and may exit earlier within the round.
    """
    if samples_in_round < HYSTART_SAMPLES:
        return False
    return round_min_sample >= min_rtt + hystart_threshold(min_rtt, floor)


def hystart_threshold(min_rtt: SimTime, floor: SimTime = HYSTART_FLOOR) -> SimTime:
    return max(floor, min_rtt // HYSTART_DIVISOR)


def blitzstart_initial_cwnd(bandwidth_kbps: int, overestimate_factor: float,
                            min_rtt: SimTime,
                            params: CubicParams = DEFAULT_PARAMS) -> int:
    """Bandwidth-delay product in bytes, exactly.

    bandwidth * factor * min_rtt / 8, evaluated in rational arithmetic and
    floored, then clamped to the two-segment cwnd floor.
    """
    if bandwidth_kbps <= 0:
        raise ValueError("bandwidth must be positive")
    if min_rtt <= 0:
        raise ValueError("min_rtt must be positive")
    bits = (Fraction(bandwidth_kbps * 1000) * Fraction(overestimate_factor)
            * Fraction(min_rtt, NS_PER_S))
    cwnd = int(bits / 8)
    return max(cwnd, params.floor_bytes)


class CubicController:
    """Cubic congestion avoidance with pluggable startup.

    Baseline: Slow Start (cwnd += acked bytes) with the delay-increase
    exit above and loss exit. Blitzstart: begins in congestion avoidance
    at the hinted BDP and can never enter Slow Start.
    """

    def __init__(self, params: CubicParams = DEFAULT_PARAMS,
                 hystart_floor: SimTime = HYSTART_FLOOR):
        self.params = params
        self.hystart_floor = hystart_floor
        self.mode = Mode.SLOW_START
        self.cwnd = params.initial_window_bytes
        self.ssthresh: Optional[int] = None  # None = unbounded
        self.w_max_segments = 0.0
        self.epoch_start: SimTime = 0
        self.cubic_k = 0.0           # seconds
        self.recovery_until_pkt_num = -1
        self.initial_burst = params.initial_burst_packets
        self.started_in_avoidance = False
        # slow-start round bookkeeping
        self._min_rtt: Optional[SimTime] = None
        self._round_end_pkt = 0
        self._round_exceed_count = 0
        self._round_samples = 0
        self.congestion_events = 0
        self.mode_trace: list[tuple[SimTime, Mode]] = []

    # -- construction -----------------------------------------------------

    @classmethod
    def baseline(cls, params: CubicParams = DEFAULT_PARAMS,
                 hystart_floor: SimTime = HYSTART_FLOOR) -> "CubicController":
        return cls(params, hystart_floor)

    @classmethod
    def blitzstart(cls, config: BlitzstartConfig, min_rtt: SimTime, now: SimTime,
                   params: CubicParams = DEFAULT_PARAMS) -> "CubicController":
        """Skip Slow Start: window = hinted BDP, mode = congestion avoidance.

        Raises ValueError on an unusable hint; callers fall back to
        baseline() in that case.
        """
        if not config.hint.is_usable():
            raise ValueError("hint carries no bandwidth estimate")
        ctrl = cls(params)
        ctrl.cwnd = blitzstart_initial_cwnd(
            config.hint.bandwidth_kbps, config.overestimate_factor, min_rtt,
            params)
        ctrl.started_in_avoidance = True
        ctrl.ssthresh = ctrl.cwnd
        ctrl.initial_burst = 0 if config.pace_all else params.initial_burst_packets
        ctrl._enter_avoidance_at_plateau(now)
        return ctrl

    # -- pacing hooks ------------------------------------------------------

    def pacing_fraction(self) -> Fraction:
        # half the RTT in Slow Start, three quarters afterwards
        return PACE_SLOW_START if self.mode is Mode.SLOW_START else PACE_AVOIDANCE

    # -- state transitions --------------------------------------------------

    def _set_mode(self, mode: Mode, now: SimTime) -> None:
        if mode is not self.mode:
            self.mode = mode
            self.mode_trace.append((now, mode))

    def _enter_avoidance_at_plateau(self, now: SimTime) -> None:
        # Entry without a reduction (Slow Start exit, Blitzstart init).
        # K is computed from the formula shared with reduction epochs; the
        # window is never cut here (growth below applies max against the
        # current cwnd), so the effect is a flat plateau of K seconds at
        # the entry window followed by convex probing.
        self.w_max_segments = self.cwnd / self.params.segment_bytes
        self.cubic_k = cubic_k_seconds(self.w_max_segments, self.params)
        self.epoch_start = now
        self._set_mode(Mode.AVOIDANCE, now)

    def on_ack(self, newly_acked_bytes: int, rtt_sample: Optional[SimTime],
               now: SimTime, largest_acked_pkt: int, largest_sent_pkt: int,
               srtt: Optional[SimTime] = None) -> None:
        if rtt_sample is not None:
            if self._min_rtt is None or rtt_sample < self._min_rtt:
                self._min_rtt = rtt_sample
        if self.mode is Mode.SLOW_START:
            self._slow_start_on_ack(newly_acked_bytes, rtt_sample, now,
                                    largest_acked_pkt, largest_sent_pkt)
            return
        if self.mode is Mode.RECOVERY:
            if largest_acked_pkt >= self.recovery_until_pkt_num:
                self._set_mode(Mode.AVOIDANCE, now)
            else:
                return
        if newly_acked_bytes > 0:
            target = self.cubic_window_bytes(now)
            if srtt is not None and srtt > 0:
                est = reno_friendly_segments((now - self.epoch_start) / NS_PER_S,
                                             self.w_max_segments,
                                             srtt / NS_PER_S, self.params)
                est_bytes = int(est * self.params.segment_bytes)
                if est_bytes > target:
                    target = est_bytes
            if target > self.cwnd:
                self.cwnd = target

    def _slow_start_on_ack(self, newly_acked: int, rtt_sample: Optional[SimTime],
                           now: SimTime, largest_acked: int,
                           largest_sent: int) -> None:
        self.cwnd += newly_acked
        if self.ssthresh is not None and self.cwnd >= self.ssthresh:
            self.cwnd = self.ssthresh
            self._enter_avoidance_at_plateau(now)
            return
        if rtt_sample is None or self._min_rtt is None:
            return
        if largest_acked >= self._round_end_pkt:
            self._round_end_pkt = largest_sent + 1
            self._round_exceed_count = 0
            self._round_samples = 0
        self._round_samples += 1
        if rtt_sample >= self._min_rtt + hystart_threshold(self._min_rtt,
                                                           self.hystart_floor):
            self._round_exceed_count += 1
            if self._round_exceed_count >= HYSTART_SAMPLES:
                self._enter_avoidance_at_plateau(now)

    def cubic_window_bytes(self, now: SimTime) -> int:
        t = (now - self.epoch_start) / NS_PER_S
        w = cubic_window_segments(t, self.w_max_segments, self.cubic_k,
                                  self.params)
        return max(self.params.floor_bytes, int(w * self.params.segment_bytes))

    def on_congestion_event(self, now: SimTime, lost_pkt_num: int,
                            largest_sent_pkt: int) -> bool:
        """Multiplicative decrease, at most once per round trip.

        Losses of packets sent before the current recovery period began do
        not trigger another reduction. A flow whose peak is shrinking
        remembers a further-reduced peak (fast convergence), which is what
        lets competing flows drift toward a fair share. Returns whether a
        reduction applied.
        """
        if lost_pkt_num <= self.recovery_until_pkt_num:
            return False
        self.congestion_events += 1
        peak = self.cwnd / self.params.segment_bytes
        if peak < self.w_max_segments:
            self.w_max_segments = peak * (1.0 + self.params.beta) / 2.0
        else:
            self.w_max_segments = peak
        self.cwnd = max(self.params.floor_bytes,
                        int(self.cwnd * self.params.beta))
        self.ssthresh = self.cwnd
        self.cubic_k = cubic_k_seconds(self.w_max_segments, self.params)
        self.epoch_start = now
        self.recovery_until_pkt_num = largest_sent_pkt
        self._set_mode(Mode.RECOVERY, now)
        return True


def make_controller(hint: Optional[BandwidthHint], min_rtt: SimTime,
                    now: SimTime, overestimate_factor: float = 1.0,
                    pace_all: bool = False,
                    params: CubicParams = DEFAULT_PARAMS,
                    hystart_floor: SimTime = HYSTART_FLOOR) -> CubicController:
    """Controller selection as the server would do it.

    A missing or unusable hint (no estimate, zero bandwidth) selects the
    baseline Slow Start controller; a usable one selects Blitzstart. The
    hint may carry its own min-RTT sample (from a previous connection),
    which then overrides the handshake sample.
    """
    if hint is None or not hint.is_usable():
        return CubicController.baseline(params, hystart_floor)
    if hint.min_rtt_us is not None and hint.min_rtt_us > 0:
        min_rtt = hint.min_rtt_us * 1000
    if min_rtt <= 0:
        return CubicController.baseline(params, hystart_floor)
    cfg = BlitzstartConfig(hint, overestimate_factor, pace_all)
    return CubicController.blitzstart(cfg, min_rtt, now, params)
