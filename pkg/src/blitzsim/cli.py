"""Command line front end.

    blitzsim run        run experiment matrix cells, emit runs/summary CSVs
    blitzsim demo-fig1  two-flow startup study: rolling-bandwidth CSVs
    blitzsim validate   run the invariant suite
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import checks, harness
from .engine import NS_PER_MS, NS_PER_S, seconds
from .harness import (PRESETS, SIZES, PacketTrace, Variant, default_variants,
                      emit_runs_csv, emit_summary_csv, emit_trace_csv,
                      parse_scenario_file, rolling_bandwidth, run_matrix,
                      run_scenario, single_flow_run)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blitzsim",
        description="Congestion-control startup experiments on a simulated "
                    "dumbbell bottleneck.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run matrix cells")
    run_p.add_argument("--scenario", default="all",
                       help="scenario name or 'all' "
                            f"(names: {', '.join(PRESETS)})")
    run_p.add_argument("--size", default="all",
                       help="70K, 2M, 10M, or 'all'")
    run_p.add_argument("--variant", default="all",
                       help="baseline, blitz:<factor>[:<overestimate>], or 'all'")
    run_p.add_argument("--reps", type=int, default=30)
    run_p.add_argument("--seed", type=int, default=1)
    run_p.add_argument("--out", default="out")
    run_p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    run_p.add_argument("--scenario-file", default=None,
                       help="key = value file describing a single cell")
    run_p.add_argument("--trace", action="store_true",
                       help="also write per-run packet trace CSVs (serial)")

    demo = sub.add_parser("demo-fig1",
                          help="startup traces: lone flow, then a flow "
                               "entering a saturated bottleneck")
    demo.add_argument("--out", default="out")
    demo.add_argument("--seed", type=int, default=1)
    demo.add_argument("--top-duration-s", type=float, default=2.0)
    demo.add_argument("--bottom-duration-s", type=float, default=90.0)

    val = sub.add_parser("validate", help="run the invariant suite")
    val.add_argument("--seed", type=int, default=1)
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.scenario_file:
        cfg, size, variant, reps = parse_scenario_file(Path(args.scenario_file))
        scenarios, sizes, variants = [cfg], [size], [variant]
    else:
        if args.scenario == "all":
            scenarios = list(PRESETS.values())
        elif args.scenario in PRESETS:
            scenarios = [PRESETS[args.scenario]]
        else:
            print(f"unknown scenario {args.scenario!r}", file=sys.stderr)
            return 2
        if args.size == "all":
            sizes = list(SIZES.values())
        elif args.size in SIZES:
            sizes = [SIZES[args.size]]
        else:
            print(f"unknown size {args.size!r}", file=sys.stderr)
            return 2
        if args.variant == "all":
            variants = default_variants()
        else:
            variants = [Variant.parse(args.variant)]
        reps = args.reps
    scenarios = [replace(cfg, seed_base=args.seed) for cfg in scenarios]

    total = len(scenarios) * len(sizes) * len(variants) * reps

    def progress(done: int, n: int) -> None:
        if done % 50 == 0 or done == n:
            print(f"\r{done}/{n} runs", end="", file=sys.stderr, flush=True)

    if args.trace:
        results = []
        done = 0
        for cfg in scenarios:
            for size in sizes:
                for variant in variants:
                    for rep in range(reps):
                        trace = PacketTrace()
                        results.append(run_scenario(cfg, size, variant, rep,
                                                    trace=trace))
                        name = (f"trace_{cfg.name}_{size}_"
                                f"{variant.label().replace(':', '_')}_{rep}.csv")
                        emit_trace_csv(trace, out / name)
                        done += 1
                        progress(done, total)
    else:
        results = run_matrix(scenarios, sizes, variants, reps,
                             jobs=args.jobs, progress=progress)
    print(file=sys.stderr)

    emit_runs_csv(results, out / "runs.csv")
    emit_summary_csv(results, out / "summary.csv")
    timeouts = sum(1 for r in results if r.timeout)
    print(f"{len(results)} runs ({timeouts} timeouts) -> "
          f"{out / 'runs.csv'}, {out / 'summary.csv'}")
    return 0


def _cmd_demo_fig1(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = replace(PRESETS["dsl-fast"], seed_base=args.seed)
    rtt = cfg.rtt

    # lone flow on an idle link: exponential startup, then avoidance
    top_end = seconds(args.top_duration_s)
    conn, link, trace = single_flow_run(cfg, 1 << 30, top_end)
    with open(out / "fig1_top.csv", "w") as fh:
        fh.write("time_us,flow_id,window_us,bps\n")
        series = rolling_bandwidth(trace.deliveries(0), rtt, top_end)
        for t, bps in series:
            fh.write(f"{t // 1000},0,{rtt // 1000},{bps:.1f}\n")

    # second flow entering a bottleneck the first flow has saturated
    bottom_end = seconds(args.bottom_duration_s)
    bcfg = replace(cfg, sim_cap=bottom_end)
    dtrace = PacketTrace(only={"deliver"})
    run = harness._setup_two_flows(bcfg, 1 << 30, Variant("baseline"), 0,
                                   trace=dtrace, stop_on_completion=False)
    run.sim.run_until(None)
    with open(out / "fig1_bottom.csv", "w") as fh:
        fh.write("time_us,flow_id,window_us,bps\n")
        for flow in (harness.LONG_FLOW, harness.SHORT_FLOW):
            for window in (rtt, NS_PER_S):
                series = rolling_bandwidth(dtrace.deliveries(flow), window,
                                           bottom_end)
                for t, bps in series:
                    fh.write(f"{t // 1000},{flow},{window // 1000},{bps:.1f}\n")
    start = run.short_conn.start_at
    start_ms = "n/a" if start is None else start // NS_PER_MS
    print(f"fig1_top.csv and fig1_bottom.csv written to {out} "
          f"(second flow entered at {start_ms} ms)")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    ok = checks.run_all(seed=args.seed)
    print("validate:", "all checks passed" if ok else "FAILURES above")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "demo-fig1":
        return _cmd_demo_fig1(args)
    if args.command == "validate":
        return _cmd_validate(args)
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
