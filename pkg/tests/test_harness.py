import statistics
from dataclasses import replace

import pytest

from blitzsim.cli import main
from blitzsim.engine import ms, seconds
from blitzsim.harness import (PRESETS, RUNS_HEADER, SIZES, TRACE_HEADER,
                              PacketTrace, RunResult, Variant,
                              aggregate, default_variants, emit_runs_csv,
                              emit_summary_csv, emit_trace_csv, fairness_ratio,
                              parse_scenario_file, rolling_bandwidth,
                              run_matrix, run_scenario, summarize)
from blitzsim.signaling import AccessTech


# -- presets: the four built-in profiles -------------------------------------------

def test_presets_match_published_profiles():
    expect = {
        "dsl-slow": (ms(50), 25_000, 104),
        "dsl-fast": (ms(50), 50_000, 208),
        "3g": (ms(90), 8_000, 140),
        "lte": (ms(70), 32_000, 560),
    }
    assert set(PRESETS) == set(expect)
    for name, (rtt, kbps, buf) in expect.items():
        cfg = PRESETS[name]
        assert (cfg.rtt, cfg.bottleneck_kbps, cfg.buffer_pkts) == (rtt, kbps, buf)
        assert cfg.repetitions == 30
        assert cfg.long_flow_bytes == 1 << 30


def test_default_matrix_has_table_shape():
    variants = default_variants()
    assert [v.label() for v in variants] == [
        "baseline", "blitz:0.5", "blitz:1", "blitz:1.5", "blitz:3", "blitz:4"]
    assert len(PRESETS) * len(SIZES) * len(variants) == 72
    assert len(PRESETS) * len(SIZES) * len(variants) * 30 == 2160


def test_variant_parsing():
    assert Variant.parse("baseline") == Variant("baseline")
    assert Variant.parse("blitz:1.5") == Variant("blitz", 1.5)
    assert Variant.parse("blitz:1.0:2.0") == Variant("blitz", 1.0, 2.0)
    assert Variant.parse("blitz:1.0:2.0").label() == "blitz:1:2"
    with pytest.raises(ValueError):
        Variant.parse("turbo:9")


# -- fairness ratio -----------------------------------------------------------------

def test_fairness_equal_share():
    assert fairness_ratio(5_000_000, 5_000_000) == 1.0


def test_fairness_long_flow_dominates():
    assert fairness_ratio(2_000_000, 8_000_000) == 0.25


def test_fairness_skewed_to_short_flow():
    assert fairness_ratio(3_000_000, 2_000_000) == 1.5


def test_fairness_undefined_without_long_bytes():
    assert fairness_ratio(1000, 0) is None


# -- rolling bandwidth ----------------------------------------------------------------

def test_rolling_bandwidth_constant_delivery_is_flat():
    # one 1500 B packet every 240 us is exactly 50 Mbit/s
    deliveries = [(i * 240_000, 1500) for i in range(1, 5000)]
    series = rolling_bandwidth(deliveries, ms(50), seconds(1))
    plateau = [bps for t, bps in series if ms(100) <= t <= seconds(1)]
    for bps in plateau:
        assert bps == pytest.approx(50e6, rel=0.005)


def test_rolling_bandwidth_empty_trace_is_zero():
    series = rolling_bandwidth([], ms(50), ms(200))
    assert all(bps == 0.0 for _t, bps in series)


def test_rolling_bandwidth_single_packet():
    # 1500 * 8 / 0.05 = 240 kbit/s while the packet is inside the window
    series = rolling_bandwidth([(ms(10), 1500)], ms(50), ms(200))
    by_t = dict(series)
    assert by_t[ms(10)] == pytest.approx(240_000)
    assert by_t[ms(59)] == pytest.approx(240_000)
    assert by_t[ms(61)] == 0.0
    assert by_t[ms(5)] == 0.0


def test_rolling_bandwidth_rejects_bad_window():
    with pytest.raises(ValueError):
        rolling_bandwidth([], 0, ms(10))


# -- statistics ------------------------------------------------------------------------

def _result(variant, rep, fct_ms, lost, fairness=1.0):
    return RunResult(scenario="t", size_bytes=2_000_000, variant=variant,
                     rep=rep, seed=1, fct=ms(fct_ms), lost_pkts=lost,
                     retransmitted_bytes=0, inflation=0.0, fairness=fairness,
                     short_bytes=1, long_bytes=1, timeout=False)


def test_aggregate_identical_groups():
    group = [_result("baseline", i, 100, 5) for i in range(30)]
    stats = aggregate(group, group)
    assert stats.fct.factor == 1.0
    assert stats.fct.ci_lo <= 0.0 <= stats.fct.ci_hi
    assert not stats.fct.significant
    assert stats.fct.anova_f == 0.0
    assert stats.loss.factor == 1.0
    assert not stats.loss.significant


def test_aggregate_constant_difference_is_significant():
    base = [_result("baseline", i, 100, 5) for i in range(30)]
    var = [_result("blitz:1", i, 100, 10) for i in range(30)]
    stats = aggregate(var, base)
    assert stats.loss.delta == 5.0
    assert (stats.loss.ci_lo, stats.loss.ci_hi) == (5.0, 5.0)
    assert stats.loss.significant
    assert stats.loss.factor == 2.0


def test_aggregate_fct_factor_convention():
    # baseline mean 1 s, variant mean 0.5 s: factor 2.0, delta -500 ms
    base = [_result("baseline", i, 1000, 0) for i in range(30)]
    var = [_result("blitz:1", i, 500, 0) for i in range(30)]
    stats = aggregate(var, base)
    assert stats.fct.factor == 2.0
    assert stats.fct.delta == pytest.approx(-500_000)  # microseconds
    assert stats.fct.significant
    # factor and signed delta always agree in direction
    assert (stats.fct.factor > 1.0) == (stats.fct.delta < 0)


def test_aggregate_needs_at_least_two_pairs():
    with pytest.raises(ValueError):
        aggregate([_result("v", 0, 1, 0)], [_result("baseline", 0, 1, 0)])


def test_aggregate_requires_paired_reps():
    base = [_result("baseline", i, 100, 0) for i in range(3)]
    var = [_result("v", i + 7, 100, 0) for i in range(3)]
    with pytest.raises(ValueError):
        aggregate(var, base)


def test_anova_distinguishes_separated_groups():
    base = [_result("baseline", i, 100 + (i % 3), 0) for i in range(30)]
    var = [_result("v", i, 200 + (i % 3), 0) for i in range(30)]
    stats = aggregate(var, base)
    assert stats.fct.anova_f > 100
    assert stats.fct.anova_p < 1e-6


# -- running scenarios --------------------------------------------------------------------

FAST70K = SIZES["70K"]


def test_run_scenario_is_deterministic():
    cfg = PRESETS["dsl-fast"]
    a = run_scenario(cfg, FAST70K, Variant("blitz", 1.0), rep=0)
    b = run_scenario(cfg, FAST70K, Variant("blitz", 1.0), rep=0)
    assert a == b


def test_run_scenario_reps_differ_via_jitter():
    cfg = PRESETS["dsl-fast"]
    a = run_scenario(cfg, FAST70K, Variant("baseline"), rep=0)
    b = run_scenario(cfg, FAST70K, Variant("baseline"), rep=1)
    assert a.short_start_at != b.short_start_at


def test_paired_seeding_same_start_jitter_across_variants():
    cfg = PRESETS["dsl-fast"]
    base = run_scenario(cfg, FAST70K, Variant("baseline"), rep=3)
    blitz = run_scenario(cfg, FAST70K, Variant("blitz", 1.0), rep=3)
    assert base.short_start_at == blitz.short_start_at


def test_short_flow_waits_for_saturation():
    cfg = PRESETS["dsl-fast"]
    r = run_scenario(cfg, FAST70K, Variant("baseline"), rep=0)
    assert r.sat_at is not None
    assert r.sat_at >= 2 * cfg.rtt
    assert r.short_start_at >= r.sat_at + cfg.short_flow_start


def test_fct_lower_bound_two_round_trips():
    # handshake plus at least one data round trip
    cfg = PRESETS["dsl-fast"]
    r = run_scenario(cfg, FAST70K, Variant("baseline"), rep=0)
    assert not r.timeout
    assert r.fct >= 2 * cfg.rtt


def test_all_events_use_the_closed_kind_set():
    from blitzsim.engine import EVENT_KINDS
    from blitzsim.harness import _setup_two_flows
    run = _setup_two_flows(PRESETS["dsl-fast"], FAST70K, Variant("blitz", 1.0), 0)
    run.sim.record_trace = True
    run.sim.run_until(None)
    kinds = {kind for _t, _s, kind, _target in run.sim.trace}
    assert kinds <= set(EVENT_KINDS)
    assert {"packet-arrival", "packet-departure", "pacing-timer",
            "app-start"} <= kinds


def test_blitz_run_reports_congestion_avoidance_from_first_packet():
    cfg = PRESETS["dsl-fast"]
    trace = PacketTrace()
    from blitzsim.harness import _setup_two_flows
    run = _setup_two_flows(cfg, FAST70K, Variant("blitz", 1.0), 0, trace=trace)
    run.sim.run_until(None)
    ctrl = run.short_conn.controller
    assert ctrl.started_in_avoidance
    assert all(m.value != "slow-start" for _t, m in ctrl.mode_trace)


def test_timeout_flagging():
    cfg = replace(PRESETS["dsl-fast"], sim_cap=ms(200))  # nothing can finish
    r = run_scenario(cfg, FAST70K, Variant("baseline"), rep=0)
    assert r.timeout
    assert r.fct is None


def test_run_matrix_covers_all_cells_and_sorts():
    cfg = replace(PRESETS["dsl-fast"], sim_cap=seconds(30))
    results = run_matrix([cfg], [FAST70K], default_variants(), reps=2, jobs=2)
    assert len(results) == 12
    keys = [(r.scenario, r.size_bytes, r.variant, r.rep) for r in results]
    assert keys == sorted(keys)
    assert len(set(keys)) == 12


# -- emission ---------------------------------------------------------------------------

def test_emit_runs_csv_schema_and_determinism(tmp_path):
    cfg = PRESETS["dsl-fast"]
    results = [run_scenario(cfg, FAST70K, Variant("baseline"), rep=i)
               for i in range(2)]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_runs_csv(results, p1)
    emit_runs_csv(results, p2)
    assert p1.read_bytes() == p2.read_bytes()
    lines = p1.read_text().splitlines()
    assert lines[0] == RUNS_HEADER
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "dsl-fast"
    assert first[1] == str(FAST70K)
    assert first[2] == "baseline"


def test_emit_runs_csv_header_only_when_empty(tmp_path):
    p = tmp_path / "empty.csv"
    emit_runs_csv([], p)
    assert p.read_text() == RUNS_HEADER + "\n"


def test_summary_has_one_row_per_cell_with_stats(tmp_path):
    base = [_result("baseline", i, 1000, 2) for i in range(5)]
    var = [_result("blitz:1", i, 500, 9) for i in range(5)]
    rows = summarize(base + var)
    assert len(rows) == 2
    by_variant = {r["variant"]: r for r in rows}
    assert by_variant["blitz:1"]["fct_factor"] == pytest.approx(2.0)
    assert by_variant["baseline"]["fct_factor"] == pytest.approx(1.0)
    p = tmp_path / "summary.csv"
    emit_summary_csv(base + var, p)
    lines = p.read_text().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("scenario,size_bytes,variant,n,")


def test_trace_csv_schema(tmp_path):
    cfg = PRESETS["dsl-fast"]
    trace = PacketTrace()
    run_scenario(cfg, FAST70K, Variant("baseline"), rep=0, trace=trace)
    p = tmp_path / "trace.csv"
    emit_trace_csv(trace, p)
    lines = p.read_text().splitlines()
    assert lines[0] == TRACE_HEADER
    events = {line.split(",")[2] for line in lines[1:]}
    assert events <= {"send", "deliver", "drop", "ack"}
    assert "send" in events and "deliver" in events and "ack" in events


# -- scenario files -----------------------------------------------------------------------

def test_parse_scenario_file_roundtrip(tmp_path):
    p = tmp_path / "custom.scenario"
    p.write_text(
        "# a tight custom profile\n"
        "name = tiny\n"
        "rtt_ms = 40\n"
        "bottleneck_kbps = 10000\n"
        "buffer_pkts = 50\n"
        "access_tech = wifi\n"
        "short_flow_bytes = 70000\n"
        "short_flow_start_ms = 500\n"
        "variant = blitz:1.5:2.0\n"
        "repetitions = 4\n"
        "seed_base = 9\n")
    cfg, size, variant, reps = parse_scenario_file(p)
    assert cfg.name == "tiny"
    assert cfg.rtt == ms(40)
    assert cfg.bottleneck_kbps == 10_000
    assert cfg.buffer_pkts == 50
    assert cfg.access_tech is AccessTech.WIFI
    assert cfg.short_flow_start == ms(500)
    assert size == 70_000
    assert variant == Variant("blitz", 1.5, 2.0)
    assert reps == 4


def test_parse_scenario_file_rejects_unknown_keys(tmp_path):
    p = tmp_path / "bad.scenario"
    p.write_text("name = x\nwarp_speed = 9\n")
    with pytest.raises(ValueError):
        parse_scenario_file(p)


def test_parse_scenario_file_requires_core_fields(tmp_path):
    p = tmp_path / "sparse.scenario"
    p.write_text("name = x\n")
    with pytest.raises(ValueError):
        parse_scenario_file(p)


# -- CLI -------------------------------------------------------------------------------------

def test_cli_single_cell_run(tmp_path):
    out = tmp_path / "out"
    rc = main(["run", "--scenario", "dsl-fast", "--size", "70K",
               "--variant", "baseline", "--reps", "2", "--seed", "7",
               "--out", str(out), "--jobs", "1"])
    assert rc == 0
    runs = (out / "runs.csv").read_text().splitlines()
    assert len(runs) == 3
    assert (out / "summary.csv").exists()


def test_cli_rejects_unknown_scenario(tmp_path):
    rc = main(["run", "--scenario", "marsnet", "--out", str(tmp_path)])
    assert rc == 2


def test_cli_scenario_file(tmp_path):
    p = tmp_path / "cell.scenario"
    p.write_text(
        "name = cell\nrtt_ms = 50\nbottleneck_kbps = 50000\n"
        "buffer_pkts = 208\naccess_tech = dsl\nshort_flow_bytes = 70000\n"
        "variant = blitz:1.0\nrepetitions = 1\n")
    out = tmp_path / "out"
    rc = main(["run", "--scenario-file", str(p), "--out", str(out),
               "--jobs", "1", "--seed", "3"])
    assert rc == 0
    lines = (out / "runs.csv").read_text().splitlines()
    assert len(lines) == 2
    assert lines[1].startswith("cell,70000,blitz:1,")


def test_cli_demo_fig1(tmp_path):
    out = tmp_path / "fig"
    rc = main(["demo-fig1", "--out", str(out), "--seed", "2",
               "--top-duration-s", "0.6", "--bottom-duration-s", "3"])
    assert rc == 0
    top = (out / "fig1_top.csv").read_text().splitlines()
    assert top[0] == "time_us,flow_id,window_us,bps"
    assert len(top) > 100
    bottom = (out / "fig1_bottom.csv").read_text().splitlines()
    flows = {line.split(",")[1] for line in bottom[1:]}
    assert flows == {"0", "1"}
