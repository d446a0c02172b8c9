"""Experiment harness: scenario matrix, metrics, statistics, CSV output.

Four built-in scenarios (two DSL profiles and two deep-buffered mobile
profiles) each carry a rate-limited bottleneck and a long-running baseline
flow. A short flow of 70 KB, 2 MB, or 10 MB enters once the bottleneck has
been saturated and its completion time, declared losses, retransmission
inflation, and fairness against the long flow are recorded. Every cell is
repeated with per-repetition seeds; repetition i of a variant and of the
baseline share the same start-time jitter draw so difference distributions
are paired.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, replace
from multiprocessing import Pool
from pathlib import Path
from typing import Callable, Optional, Sequence

from .congestion import (HYSTART_FLOOR, HYSTART_FLOOR_PKTS, CubicController,
                         make_controller)
from .engine import (NS_PER_MS, NS_PER_S, NS_PER_US, SimTime, Simulator,
                     ms, substream, us)
from .netmodel import SEGMENT_WIRE_BYTES, Link, LinkConfig, Packet
from .signaling import (AccessTech, BandwidthHint, HintDecodeError,
                        OracleEstimator, decode_hint, encode_hint)
from .transport import Connection

SIZES = {"70K": 70_000, "2M": 2_000_000, "10M": 10_000_000}
ESTIMATE_FACTORS = (0.5, 1.0, 1.5, 3.0, 4.0)
LONG_FLOW_BYTES = 1 << 30
SIM_CAP = 300 * NS_PER_S
PKT_JITTER_MAX = 10 * NS_PER_US

LONG_FLOW = 0
SHORT_FLOW = 1


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    rtt: SimTime
    bottleneck_kbps: int
    buffer_pkts: int
    access_tech: AccessTech
    long_flow_bytes: int = LONG_FLOW_BYTES
    short_flow_start: SimTime = NS_PER_S  # offset after saturation
    repetitions: int = 30
    seed_base: int = 1
    start_jitter_max: Optional[SimTime] = None  # None: one RTT
    pkt_jitter_max: SimTime = PKT_JITTER_MAX
    sim_cap: SimTime = SIM_CAP

    @property
    def rate_bps(self) -> int:
        return self.bottleneck_kbps * 1000

    def link_config(self) -> LinkConfig:
        return LinkConfig(rate_bps=self.rate_bps, prop_delay=self.rtt // 2,
                          buffer_pkts=self.buffer_pkts)

    @property
    def hystart_floor(self) -> SimTime:
        """Delay-exit noise floor.

        The initial burst parks burst-1 packets behind the first one. When
        Slow Start pacing is slower than the link drains (fast links), that
        self-queue disperses within a few packets and the default floor
        holds. When pacing cannot outrun serialization (slow links), the
        burst's standing delay persists through the whole first round and
        the floor must sit above it or it reads as path congestion.
        """
        from .congestion import DEFAULT_PARAMS
        ser = self.link_config().serialization_time(SEGMENT_WIRE_BYTES)
        iw = DEFAULT_PARAMS.initial_window_segments
        ss_interval = self.rtt // (2 * iw)
        if ss_interval <= ser:
            return max(HYSTART_FLOOR, HYSTART_FLOOR_PKTS * ser)
        return HYSTART_FLOOR


# The 3g preset waits out the long flow's first buffer fill (about 11 s of
# virtual time on that link) so short flows meet the deep buffer in its
# Cubic steady state; on the other links the buffer reaches steady state
# after the shorter default settle.
PRESETS: dict[str, ScenarioConfig] = {
    "dsl-slow": ScenarioConfig("dsl-slow", ms(50), 25_000, 104, AccessTech.DSL),
    "dsl-fast": ScenarioConfig("dsl-fast", ms(50), 50_000, 208, AccessTech.DSL),
    "3g": ScenarioConfig("3g", ms(90), 8_000, 140, AccessTech.THREE_G,
                         short_flow_start=16 * NS_PER_S),
    "lte": ScenarioConfig("lte", ms(70), 32_000, 560, AccessTech.LTE),
}


@dataclass(frozen=True)
class Variant:
    kind: str  # "baseline" | "blitz"
    factor: float = 1.0
    overestimate: float = 1.0
    pace_all: bool = False

    def label(self) -> str:
        if self.kind == "baseline":
            return "baseline"
        out = f"blitz:{self.factor:g}"
        if self.overestimate != 1.0:
            out += f":{self.overestimate:g}"
        return out

    @classmethod
    def parse(cls, text: str) -> "Variant":
        if text == "baseline":
            return cls("baseline")
        parts = text.split(":")
        if parts[0] != "blitz" or len(parts) not in (2, 3):
            raise ValueError(f"bad variant {text!r}; want baseline or "
                             "blitz:<factor>[:<overestimate>]")
        factor = float(parts[1])
        overest = float(parts[2]) if len(parts) == 3 else 1.0
        return cls("blitz", factor, overest)


def default_variants() -> list[Variant]:
    return [Variant("baseline")] + [Variant("blitz", f) for f in ESTIMATE_FACTORS]


class PacketTrace:
    """Per-packet event log: send, deliver, drop, ack.

    `only` restricts recording to a subset of events, which keeps long
    runs affordable when just deliveries are needed.
    """

    def __init__(self, only: Optional[set[str]] = None):
        self.rows: list[tuple[SimTime, int, str, int, int, int]] = []
        self.only = only

    def __call__(self, now: SimTime, flow_id: int, event: str, pkt_num: int,
                 seq: int, length: int) -> None:
        if self.only is not None and event not in self.only:
            return
        self.rows.append((now, flow_id, event, pkt_num, seq, length))

    def deliveries(self, flow_id: int) -> list[tuple[SimTime, int]]:
        return [(t, length) for t, f, ev, _p, _s, length in self.rows
                if f == flow_id and ev == "deliver"]


@dataclass
class RunResult:
    scenario: str
    size_bytes: int
    variant: str
    rep: int
    seed: int
    fct: Optional[SimTime]
    lost_pkts: int
    retransmitted_bytes: int
    inflation: float
    fairness: Optional[float]
    short_bytes: int
    long_bytes: int
    timeout: bool
    short_start_at: Optional[SimTime] = None
    sat_at: Optional[SimTime] = None


def fairness_ratio(short_bytes: int, long_bytes: int) -> Optional[float]:
    """Short-flow bytes over long-flow bytes at the bottleneck egress.

    Below one, the long flow moved more bytes while the short flow was
    active; above one, the short flow did. None when the long flow moved
    nothing (ratio undefined).
    """
    if long_bytes == 0:
        return None
    return short_bytes / long_bytes


def rolling_bandwidth(deliveries: Sequence[tuple[SimTime, int]],
                      window: SimTime, end: SimTime, start: SimTime = 0,
                      grid: SimTime = NS_PER_MS) -> list[tuple[SimTime, float]]:
    """Delivered bits in [t - window, t] over the window, on a time grid."""
    if window <= 0:
        raise ValueError("window must be positive")
    out: list[tuple[SimTime, float]] = []
    lo = 0
    hi = 0
    in_window = 0
    n = len(deliveries)
    t = start
    while t <= end:
        while hi < n and deliveries[hi][0] <= t:
            in_window += deliveries[hi][1]
            hi += 1
        while lo < hi and deliveries[lo][0] < t - window:
            in_window -= deliveries[lo][1]
            lo += 1
        out.append((t, in_window * 8 * NS_PER_S / window))
        t += grid
    return out


class _SaturationWatch:
    """Fires once the queue has stayed non-empty for two round trips."""

    def __init__(self, sim: Simulator, link: Link, hold: SimTime,
                 on_saturated: Callable[[SimTime], None]):
        self.sim = sim
        self.hold = hold
        self.on_saturated = on_saturated
        self.nonempty_since: Optional[SimTime] = None
        self.check_ev = None
        self.fired = False
        link.on_occupancy = self._occupancy

    def _occupancy(self, now: SimTime, queued: int) -> None:
        if self.fired:
            return
        if queued > 0:
            if self.nonempty_since is None:
                self.nonempty_since = now
                self.check_ev = self.sim.schedule(
                    now + self.hold, "app-start", "saturation", self._check)
        else:
            self.nonempty_since = None
            if self.check_ev is not None:
                self.sim.cancel(self.check_ev)
                self.check_ev = None

    def _check(self, now: SimTime) -> None:
        self.check_ev = None
        if self.fired or self.nonempty_since is None:
            return
        if now - self.nonempty_since >= self.hold:
            self.fired = True
            self.on_saturated(now)


def _short_controller_factory(cfg: ScenarioConfig, variant: Variant):
    """Build the short flow's controller the way the wire protocol would.

    For the blitz variant the bandwidth estimate is produced by the oracle
    estimator, encoded as the transport parameter, and decoded again on the
    server side; any decode failure or unusable hint falls back to the
    baseline Slow Start controller.
    """
    floor = cfg.hystart_floor
    if variant.kind == "baseline":
        return lambda min_rtt, now: CubicController.baseline(hystart_floor=floor)

    estimator = OracleEstimator(variant.factor)
    hint = BandwidthHint(cfg.access_tech,
                         estimator.estimate(cfg.bottleneck_kbps))
    wire = encode_hint(hint)

    def factory(min_rtt: SimTime, now: SimTime) -> CubicController:
        try:
            received = decode_hint(wire)
        except HintDecodeError:
            return CubicController.baseline(hystart_floor=floor)
        return make_controller(received, min_rtt, now,
                               overestimate_factor=variant.overestimate,
                               pace_all=variant.pace_all, hystart_floor=floor)

    return factory


@dataclass
class TwoFlowRun:
    sim: Simulator
    link: Link
    long_conn: Connection
    short_conn: Connection
    trace: Optional[PacketTrace]
    sat_at: Optional[SimTime] = None
    short_bytes: int = 0
    long_bytes: int = 0


def _setup_two_flows(cfg: ScenarioConfig, size_bytes: int, variant: Variant,
                     rep: int, trace: Optional[PacketTrace] = None,
                     stop_on_completion: bool = True) -> TwoFlowRun:
    sim = Simulator()
    link = Link(sim, cfg.link_config())

    start_rng = substream(cfg.seed_base, cfg.name, size_bytes, rep, "start")
    pkt_rng = substream(cfg.seed_base, cfg.name, size_bytes, rep, "pkt")
    jitter_max = cfg.start_jitter_max if cfg.start_jitter_max is not None else cfg.rtt
    start_jitter = start_rng.randrange(0, jitter_max + 1)

    def pkt_jitter() -> int:
        return pkt_rng.randrange(0, cfg.pkt_jitter_max + 1)

    floor = cfg.hystart_floor
    long_conn = Connection(sim, LONG_FLOW, link, cfg.long_flow_bytes,
                           lambda mr, now: CubicController.baseline(
                               hystart_floor=floor),
                           jitter=pkt_jitter, trace=trace)
    short_conn = Connection(sim, SHORT_FLOW, link, size_bytes,
                            _short_controller_factory(cfg, variant),
                            jitter=pkt_jitter, trace=trace)
    run = TwoFlowRun(sim, link, long_conn, short_conn, trace)

    receivers = {LONG_FLOW: long_conn.receiver, SHORT_FLOW: short_conn.receiver}
    link.deliver = lambda pkt, now: receivers[pkt.flow_id].on_data(pkt, now)

    def on_departure(pkt: Packet, now: SimTime) -> None:
        if short_conn.start_at is None or short_conn.finished:
            return
        if pkt.flow_id == SHORT_FLOW:
            run.short_bytes += pkt.len
        else:
            run.long_bytes += pkt.len
    link.on_departure = on_departure

    def on_saturated(now: SimTime) -> None:
        run.sat_at = now
        sim.schedule(now + cfg.short_flow_start + start_jitter, "app-start",
                     f"conn:{SHORT_FLOW}", short_conn.start)

    _SaturationWatch(sim, link, 2 * cfg.rtt, on_saturated)

    if stop_on_completion:
        short_conn.on_finished = lambda now: sim.stop()
    sim.schedule(cfg.sim_cap, "sim-end", "cap", lambda now: sim.stop())
    long_conn.start(0)
    return run


def run_scenario(cfg: ScenarioConfig, size_bytes: int, variant: Variant,
                 rep: int, trace: Optional[PacketTrace] = None) -> RunResult:
    """One repetition of one matrix cell."""
    run = _setup_two_flows(cfg, size_bytes, variant, rep, trace=trace)
    run.sim.run_until(None)
    short = run.short_conn
    timeout = not short.finished
    inflation = short.bytes_retransmitted / size_bytes
    return RunResult(
        scenario=cfg.name,
        size_bytes=size_bytes,
        variant=variant.label(),
        rep=rep,
        seed=cfg.seed_base,
        fct=short.fct,
        lost_pkts=short.lost_pkts,
        retransmitted_bytes=short.bytes_retransmitted,
        inflation=inflation,
        fairness=fairness_ratio(run.short_bytes, run.long_bytes),
        short_bytes=run.short_bytes,
        long_bytes=run.long_bytes,
        timeout=timeout,
        short_start_at=short.start_at,
        sat_at=run.sat_at,
    )


def single_flow_run(cfg: ScenarioConfig, transfer_bytes: int,
                    duration: SimTime, rep: int = 0,
                    record_cwnd: bool = False) -> tuple[Connection, Link, PacketTrace]:
    """One flow on an idle bottleneck, for startup-behavior studies."""
    sim = Simulator()
    link = Link(sim, cfg.link_config())
    trace = PacketTrace()
    pkt_rng = substream(cfg.seed_base, cfg.name, "single", rep, "pkt")
    floor = cfg.hystart_floor
    conn = Connection(sim, LONG_FLOW, link, transfer_bytes,
                      lambda mr, now: CubicController.baseline(
                          hystart_floor=floor),
                      jitter=lambda: pkt_rng.randrange(0, cfg.pkt_jitter_max + 1),
                      trace=trace)
    if record_cwnd:
        conn.cwnd_log = []
    link.deliver = lambda pkt, now: conn.receiver.on_data(pkt, now)
    link.log_departures = True
    conn.start(0)
    sim.run_until(duration)
    return conn, link, trace


# -- statistics ---------------------------------------------------------------


@dataclass(frozen=True)
class MetricStats:
    n: int
    mean_variant: float
    mean_baseline: float
    factor: float           # improvement multiplier, direction per metric
    delta: float            # variant minus baseline
    ci_lo: float
    ci_hi: float
    significant: bool       # 0 outside the 95% CI of paired differences
    anova_f: float
    anova_p: float


def _t_critical(df: int) -> float:
    from scipy.stats import t
    return float(t.ppf(0.975, df))


def _anova_two_groups(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """One-way ANOVA F and p for two groups, safe for zero variance."""
    from scipy.stats import f as f_dist
    na, nb = len(a), len(b)
    mean_a = statistics.fmean(a)
    mean_b = statistics.fmean(b)
    grand = (sum(a) + sum(b)) / (na + nb)
    ss_between = na * (mean_a - grand) ** 2 + nb * (mean_b - grand) ** 2
    ss_within = (sum((x - mean_a) ** 2 for x in a)
                 + sum((x - mean_b) ** 2 for x in b))
    df_between = 1
    df_within = na + nb - 2
    if ss_within == 0.0:
        if ss_between == 0.0:
            return 0.0, 1.0
        return math.inf, 0.0
    f_stat = (ss_between / df_between) / (ss_within / df_within)
    p = float(f_dist.sf(f_stat, df_between, df_within))
    return f_stat, p


def _paired_stats(variant: Sequence[float], baseline: Sequence[float],
                  invert_factor: bool) -> MetricStats:
    """CI of paired differences plus the Table-style mean factor.

    invert_factor=True reports baseline/variant (used for FCT, where >1
    means the variant finished faster); False reports variant/baseline
    (used for losses, where >1 means the variant lost more).
    """
    n = len(variant)
    if n != len(baseline):
        raise ValueError("unequal repetition counts")
    if n < 2:
        raise ValueError("statistics unavailable below two repetitions")
    mean_v = statistics.fmean(variant)
    mean_b = statistics.fmean(baseline)
    if invert_factor:
        factor = mean_b / mean_v if mean_v else math.inf
    else:
        if mean_b:
            factor = mean_v / mean_b
        else:
            factor = 1.0 if mean_v == 0 else math.inf
    diffs = [v - b for v, b in zip(variant, baseline)]
    mean_d = statistics.fmean(diffs)
    if n > 1:
        sd = statistics.stdev(diffs)
    else:
        sd = 0.0
    half = _t_critical(n - 1) * sd / math.sqrt(n) if sd > 0 else 0.0
    ci_lo, ci_hi = mean_d - half, mean_d + half
    significant = not (ci_lo <= 0.0 <= ci_hi)
    f_stat, p = _anova_two_groups(variant, baseline)
    return MetricStats(n, mean_v, mean_b, factor, mean_d, ci_lo, ci_hi,
                       significant, f_stat, p)


@dataclass(frozen=True)
class ComparisonStats:
    fct: MetricStats
    loss: MetricStats


def aggregate(variant_results: Sequence[RunResult],
              baseline_results: Sequence[RunResult]) -> ComparisonStats:
    """Compare one variant cell against its paired baseline cell."""
    if len(variant_results) != len(baseline_results):
        raise ValueError("unequal repetition counts")
    by_rep_v = {r.rep: r for r in variant_results}
    by_rep_b = {r.rep: r for r in baseline_results}
    fct_v, fct_b, loss_v, loss_b = [], [], [], []
    for rep in sorted(by_rep_v):
        v, b = by_rep_v[rep], by_rep_b.get(rep)
        if b is None:
            raise ValueError(f"baseline repetition {rep} missing")
        if v.fct is None or b.fct is None:
            continue  # timeouts carry no completion time
        fct_v.append(v.fct / NS_PER_US)
        fct_b.append(b.fct / NS_PER_US)
        loss_v.append(float(v.lost_pkts))
        loss_b.append(float(b.lost_pkts))
    return ComparisonStats(
        fct=_paired_stats(fct_v, fct_b, invert_factor=True),
        loss=_paired_stats(loss_v, loss_b, invert_factor=False),
    )


# -- matrix execution ---------------------------------------------------------


def _run_cell(task: tuple[ScenarioConfig, int, Variant, int]) -> RunResult:
    cfg, size_bytes, variant, rep = task
    return run_scenario(cfg, size_bytes, variant, rep)


def run_matrix(scenarios: Sequence[ScenarioConfig], sizes: Sequence[int],
               variants: Sequence[Variant], reps: int, jobs: int = 1,
               progress: Optional[Callable[[int, int], None]] = None) -> list[RunResult]:
    """Run every (scenario, size, variant, rep) cell; order-independent."""
    tasks = [(cfg, size, variant, rep)
             for cfg in scenarios for size in sizes for variant in variants
             for rep in range(reps)]
    results: list[RunResult] = []
    if jobs <= 1:
        for i, task in enumerate(tasks):
            results.append(_run_cell(task))
            if progress is not None:
                progress(i + 1, len(tasks))
    else:
        with Pool(jobs) as pool:
            for i, res in enumerate(pool.imap_unordered(_run_cell, tasks,
                                                        chunksize=4)):
                results.append(res)
                if progress is not None:
                    progress(i + 1, len(tasks))
    results.sort(key=lambda r: (r.scenario, r.size_bytes, r.variant, r.rep))
    return results


# -- emission -----------------------------------------------------------------

RUNS_HEADER = ("scenario,size_bytes,variant,rep,seed,fct_us,lost_pkts,"
               "retx_bytes,inflation,fairness,timeout")
TRACE_HEADER = "time_us,flow_id,event,pkt_num,seq,len"


def emit_runs_csv(results: Sequence[RunResult], path: Path) -> None:
    rows = sorted(results, key=lambda r: (r.scenario, r.size_bytes,
                                          r.variant, r.rep))
    with open(path, "w", newline="") as fh:
        fh.write(RUNS_HEADER + "\n")
        for r in rows:
            fct_us = "" if r.fct is None else r.fct // NS_PER_US
            fairness = "" if r.fairness is None else f"{r.fairness:.6f}"
            fh.write(f"{r.scenario},{r.size_bytes},{r.variant},{r.rep},"
                     f"{r.seed},{fct_us},{r.lost_pkts},"
                     f"{r.retransmitted_bytes},{r.inflation:.6f},{fairness},"
                     f"{int(r.timeout)}\n")


SUMMARY_FIELDS = (
    "scenario", "size_bytes", "variant", "n",
    "mean_fct_us", "mean_lost_pkts", "mean_inflation", "median_fairness",
    "fct_factor", "fct_delta_us", "fct_ci_lo_us", "fct_ci_hi_us",
    "fct_significant", "fct_anova_f", "fct_anova_p",
    "loss_factor", "loss_delta_pkts", "loss_ci_lo", "loss_ci_hi",
    "loss_significant", "loss_anova_f", "loss_anova_p", "timeouts",
)


def summarize(results: Sequence[RunResult]) -> list[dict]:
    """One row per (scenario, size, variant), compared to the baseline cell."""
    cells: dict[tuple[str, int, str], list[RunResult]] = {}
    for r in results:
        cells.setdefault((r.scenario, r.size_bytes, r.variant), []).append(r)
    rows = []
    for (scenario, size, variant) in sorted(cells):
        group = cells[(scenario, size, variant)]
        baseline = cells.get((scenario, size, "baseline"))
        row: dict = {
            "scenario": scenario, "size_bytes": size, "variant": variant,
            "n": len(group),
            "timeouts": sum(1 for r in group if r.timeout),
        }
        done = [r for r in group if r.fct is not None]
        row["mean_fct_us"] = (statistics.fmean(r.fct / NS_PER_US for r in done)
                              if done else None)
        row["mean_lost_pkts"] = statistics.fmean(r.lost_pkts for r in group)
        row["mean_inflation"] = statistics.fmean(r.inflation for r in group)
        fair = [r.fairness for r in group if r.fairness is not None]
        row["median_fairness"] = statistics.median(fair) if fair else None
        if baseline is not None:
            try:
                stats = aggregate(group, baseline)
            except ValueError:
                stats = None
            if stats is not None:
                row.update({
                    "fct_factor": stats.fct.factor,
                    "fct_delta_us": stats.fct.delta,
                    "fct_ci_lo_us": stats.fct.ci_lo,
                    "fct_ci_hi_us": stats.fct.ci_hi,
                    "fct_significant": int(stats.fct.significant),
                    "fct_anova_f": stats.fct.anova_f,
                    "fct_anova_p": stats.fct.anova_p,
                    "loss_factor": stats.loss.factor,
                    "loss_delta_pkts": stats.loss.delta,
                    "loss_ci_lo": stats.loss.ci_lo,
                    "loss_ci_hi": stats.loss.ci_hi,
                    "loss_significant": int(stats.loss.significant),
                    "loss_anova_f": stats.loss.anova_f,
                    "loss_anova_p": stats.loss.anova_p,
                })
        rows.append(row)
    return rows


def emit_summary_csv(results: Sequence[RunResult], path: Path) -> None:
    rows = summarize(results)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS,
                                restval="", extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            formatted = {}
            for key, value in row.items():
                if value is None:
                    formatted[key] = ""
                elif isinstance(value, float):
                    formatted[key] = f"{value:.6f}"
                else:
                    formatted[key] = value
            writer.writerow(formatted)


def emit_trace_csv(trace: PacketTrace, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(TRACE_HEADER + "\n")
        for t, flow, event, pkt_num, seq, length in trace.rows:
            fh.write(f"{t // NS_PER_US},{flow},{event},{pkt_num},{seq},"
                     f"{length}\n")


# -- declarative scenario files -------------------------------------------------

_SCENARIO_FILE_KEYS = {
    "name", "rtt_ms", "bottleneck_kbps", "buffer_pkts", "access_tech",
    "long_flow_bytes", "short_flow_bytes", "short_flow_start_ms", "variant",
    "repetitions", "seed_base", "start_jitter_max_ms", "pkt_jitter_max_us",
}


def parse_scenario_file(path: Path) -> tuple[ScenarioConfig, int, Variant, int]:
    """key = value scenario description; returns (config, size, variant, reps)."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _SCENARIO_FILE_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    for required in ("name", "rtt_ms", "bottleneck_kbps", "buffer_pkts",
                     "short_flow_bytes"):
        if required not in values:
            raise ValueError(f"{path}: missing required key {required!r}")
    tech = AccessTech[values.get("access_tech", "UNKNOWN").upper()]
    cfg = ScenarioConfig(
        name=values["name"],
        rtt=ms(int(values["rtt_ms"])),
        bottleneck_kbps=int(values["bottleneck_kbps"]),
        buffer_pkts=int(values["buffer_pkts"]),
        access_tech=tech,
        long_flow_bytes=int(values.get("long_flow_bytes", LONG_FLOW_BYTES)),
        short_flow_start=ms(int(values.get("short_flow_start_ms", 1000))),
        repetitions=int(values.get("repetitions", 30)),
        seed_base=int(values.get("seed_base", 1)),
        start_jitter_max=(ms(int(values["start_jitter_max_ms"]))
                          if "start_jitter_max_ms" in values else None),
        pkt_jitter_max=us(int(values.get("pkt_jitter_max_us", 10))),
    )
    size = int(values["short_flow_bytes"])
    variant = Variant.parse(values.get("variant", "baseline"))
    return cfg, size, variant, cfg.repetitions
