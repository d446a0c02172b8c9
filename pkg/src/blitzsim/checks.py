"""Self-contained invariant suite behind `blitzsim validate`.

Each check returns (ok, detail). The suite is intentionally quick; the
heavier banded experiments live in the test suite.
"""

from __future__ import annotations

import random
from typing import Callable

from . import harness
from .congestion import (DEFAULT_PARAMS, Mode, cubic_k_seconds,
                         cubic_window_segments)
from .engine import NS_PER_MS, seconds
from .netmodel import SEGMENT_WIRE_BYTES, link_utilization
from .signaling import (AccessTech, BandwidthHint, HintDecodeError,
                        decode_hint, encode_hint)

CheckResult = tuple[bool, str]


def check_determinism(seed: int = 1) -> CheckResult:
    """Identical (scenario, seed) runs produce identical traces and metrics."""
    cfg = harness.PRESETS["dsl-fast"]
    cfg = harness.replace(cfg, seed_base=seed)
    variant = harness.Variant("blitz", 1.0)

    def one() -> tuple[list, harness.RunResult]:
        run = harness._setup_two_flows(cfg, harness.SIZES["2M"], variant, 0)
        run.sim.record_trace = True
        run.sim.run_until(None)
        short = run.short_conn
        return run.sim.trace, (short.fct, short.lost_pkts,
                               short.bytes_retransmitted, run.short_bytes,
                               run.long_bytes)

    trace_a, metrics_a = one()
    trace_b, metrics_b = one()
    if trace_a != trace_b:
        return False, "event traces differ between identical runs"
    if metrics_a != metrics_b:
        return False, f"metrics differ: {metrics_a} vs {metrics_b}"
    return True, f"{len(trace_a)} events bit-identical across reruns"


def check_conservation(seed: int = 1) -> CheckResult:
    """Reliability and packet conservation on a heavily lossy run."""
    cfg = harness.replace(harness.PRESETS["dsl-fast"], seed_base=seed)
    run = harness._setup_two_flows(cfg, harness.SIZES["2M"],
                                   harness.Variant("blitz", 4.0), 0)
    run.sim.run_until(None)
    short = run.short_conn
    if not short.finished:
        return False, "short flow did not complete"
    if short.receiver.ranges.total != short.size:
        return False, (f"delivered {short.receiver.ranges.total} bytes, "
                       f"expected {short.size}")
    if short.payload_sent != short.size + short.bytes_retransmitted:
        return False, "wire payload != transfer size + retransmitted bytes"
    link = run.link
    in_queue = sum(c.injected - c.dropped - c.departed
                   for c in link.counters.values())
    if in_queue != link.queued:
        return False, "queue occupancy disagrees with flow counters"
    for flow_id, c in link.counters.items():
        in_flight = (c.injected - c.dropped - c.delivered)
        if in_flight < 0 or c.delivered + c.dropped > c.injected:
            return False, f"flow {flow_id} conservation violated"
    if short.lost_pkts == 0:
        return False, "expected losses under 4x overestimation"
    return True, (f"transfer complete with {short.lost_pkts} losses, "
                  "conservation holds")


def check_rate_conformance(seed: int = 1) -> CheckResult:
    """Backlogged bottleneck departs within [rate * 0.995, rate]."""
    cfg = harness.replace(harness.PRESETS["dsl-fast"], seed_base=seed)
    conn, link, _trace = harness.single_flow_run(cfg, 1 << 30, seconds(2.5))
    window = (seconds(1.0), seconds(2.4))
    util = link_utilization(link, window)
    rate = cfg.rate_bps
    if not rate * 0.995 <= util <= rate:
        return False, f"utilization {util / 1e6:.3f} Mbit/s vs rate {rate / 1e6}"
    return True, f"utilization {util / 1e6:.4f} Mbit/s within 0.5% of rate"


def check_buffer_occupancy(seed: int = 1) -> CheckResult:
    cfg = harness.replace(harness.PRESETS["dsl-fast"], seed_base=seed)
    run = harness._setup_two_flows(cfg, harness.SIZES["2M"],
                                   harness.Variant("blitz", 4.0), 0)
    run.sim.run_until(None)
    if run.link.max_queued > cfg.buffer_pkts:
        return False, (f"queue peaked at {run.link.max_queued} "
                       f"> {cfg.buffer_pkts}")
    return True, (f"peak occupancy {run.link.max_queued} "
                  f"<= {cfg.buffer_pkts} packets")


def check_cubic_shape(seed: int = 1) -> CheckResult:
    """W(K) = W_max exactly; concave below the plateau, convex above."""
    params = DEFAULT_PARAMS
    for w_max in (10.0, 100.0, 400.0):
        k = cubic_k_seconds(w_max, params)
        at_k = cubic_window_segments(k, w_max, k, params)
        if abs(at_k - w_max) > 1e-9:
            return False, f"W(K) = {at_k} != {w_max}"
        at_zero = cubic_window_segments(0.0, w_max, k, params)
        if abs(at_zero - params.beta * w_max) > 1e-6:
            return False, f"W(0) = {at_zero} != beta * {w_max}"
        prev = None
        for i in range(0, 200):
            t = i * (2 * k) / 199 if k > 0 else i * 0.01
            w = cubic_window_segments(t, w_max, k, params)
            if prev is not None and w < prev:
                return False, f"W not nondecreasing at t={t}"
            if t < k and w >= w_max:
                return False, f"W(t<{k}) = {w} >= W_max"
            prev = w
    return True, "W(K) = W_max, monotone, W < W_max below the plateau"


def check_slow_start_doubling(seed: int = 1) -> CheckResult:
    """cwnd doubles per round trip on a lossless single-flow start."""
    cfg = harness.replace(harness.PRESETS["dsl-fast"], seed_base=seed)
    conn, link, _trace = harness.single_flow_run(cfg, 1 << 30, seconds(1.0),
                                                 record_cwnd=True)
    assert conn.cwnd_log is not None
    seg = SEGMENT_WIRE_BYTES
    initial = DEFAULT_PARAMS.initial_window_bytes
    hits: dict[int, int] = {}
    for t, cwnd, mode in conn.cwnd_log:
        if mode is not Mode.SLOW_START:
            break
        for mult in (2, 4, 8):
            if mult not in hits and cwnd >= mult * initial:
                if cwnd != mult * initial:
                    return False, (f"round boundary cwnd {cwnd} not exactly "
                                   f"{mult}x initial window")
                hits[mult] = t
    if 2 not in hits or 4 not in hits:
        return False, "never observed two doublings before Slow Start exit"
    rtt = cfg.rtt
    gap = hits[4] - hits[2]
    if not 0.6 * rtt <= gap <= 1.8 * rtt:
        return False, f"doubling took {gap / NS_PER_MS:.1f} ms, not about one RTT"
    return True, f"doublings at {sorted(hits)}x initial window, one per RTT"


def check_hint_roundtrip(seed: int = 1, n: int = 100_000) -> CheckResult:
    rng = random.Random(seed)
    techs = list(AccessTech)
    for _ in range(n):
        hint = BandwidthHint(
            access_tech=rng.choice(techs),
            bandwidth_kbps=rng.randrange(0, 1 << 32),
            min_rtt_us=(rng.randrange(0, 1 << 32)
                        if rng.random() < 0.5 else None),
        )
        if decode_hint(encode_hint(hint)) != hint:
            return False, f"roundtrip failed for {hint}"
    return True, f"{n} randomized hints survive encode/decode"


def check_decode_totality(seed: int = 2, n: int = 100_000) -> CheckResult:
    rng = random.Random(seed)
    decoded = 0
    for _ in range(n):
        blob = rng.randbytes(rng.randrange(0, 65))
        try:
            decode_hint(blob)
            decoded += 1
        except HintDecodeError:
            pass
        except Exception as exc:  # noqa: BLE001 - the check is the point
            return False, f"decode raised {type(exc).__name__} on {blob.hex()}"
    return True, f"{n} arbitrary inputs handled ({decoded} decoded cleanly)"


ALL_CHECKS: list[tuple[str, Callable[..., CheckResult]]] = [
    ("determinism", check_determinism),
    ("conservation", check_conservation),
    ("rate-conformance", check_rate_conformance),
    ("buffer-occupancy", check_buffer_occupancy),
    ("cubic-shape", check_cubic_shape),
    ("slow-start-doubling", check_slow_start_doubling),
    ("hint-roundtrip", check_hint_roundtrip),
    ("decode-totality", check_decode_totality),
]


def run_all(seed: int = 1, report: Callable[[str], None] = print) -> bool:
    ok_all = True
    for name, fn in ALL_CHECKS:
        try:
            ok, detail = fn(seed)
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        ok_all &= ok
        report(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok_all
