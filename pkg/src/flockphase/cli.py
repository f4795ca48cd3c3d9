"""Command-line entry point: run scenarios, execute phase-diagram sweeps,
and re-analyze trajectory logs.

Exit codes: 0 success, 2 configuration error, 3 numeric failure (plant
divergence), 4 partial sweep failure (a cell with every run failed).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analysis, metrics
from .config import (
    ConfigError,
    apply_overrides,
    build_arena,
    build_flight,
    build_goal,
    build_init,
    build_model,
    build_scenario,
    build_sweep,
    config_hash,
    dump_config,
    load_config,
)
from .scenarios import ScenarioAborted, run_scenario
from .sweep import emit_tables, expand_grid, run_sweep
from .trajio import LogParseError, ResampleSpec, read_log, write_events, write_log

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_PARTIAL = 4


def _log_header(cfg: dict, spec_seed: int, log_rate: float, n_agents: int) -> dict:
    model = cfg["model"]
    return {
        "config_hash": config_hash(cfg),
        "seed": spec_seed,
        "n_agents": n_agents,
        "log_rate_hz": log_rate,
        "dphi_max": model["dphi_max"],
        "v_min": model["v_min"],
        "v_max": model["v_max"],
        "units": "t=s pos=m vel=m/s gains=1",
        "schema": 1,
    }


def _write_transition_report(path, result, n_agents: int) -> None:
    rows = []
    bounds = result.spec.schedule.boundaries()
    for k, (t0, t1, ali, att) in enumerate(bounds):
        if k == 0:
            continue
        prev_ali = bounds[k - 1][2]
        direction = "to_school" if ali > prev_ali else "to_swarm"
        mask = result.t <= t1 + 1e-9
        elapsed = metrics.transition_time(
            result.t[mask], result.P[mask], t0, direction, n_agents
        )
        rows.append((t0, direction, elapsed))
    with open(path, "w") as fh:
        fh.write("# flockphase-transitions v1\n")
        fh.write("t_switch,direction,transition_time\n")
        for t0, direction, elapsed in rows:
            value = "" if elapsed is None else format(elapsed, ".9g")
            fh.write(f"{t0:.9g},{direction},{value}\n")


def _write_recovery_report(path, result) -> None:
    n = result.spec.n_drones
    with open(path, "w") as fh:
        fh.write("# flockphase-recoveries v1\n")
        fh.write("t_open,t_close,recovery_time\n")
        for t_open, t_close in result.windows:
            if t_close is None:
                fh.write(f"{t_open:.9g},,\n")
                continue
            elapsed = metrics.recovery_time(result.t, result.P, (t_open, t_close))
            value = "" if elapsed is None else format(elapsed, ".9g")
            fh.write(f"{t_open:.9g},{t_close:.9g},{value}\n")


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args.override or [])
        if "scenario" not in cfg:
            raise ConfigError("scenario", "run requires a scenario config")
        if args.seed is not None:
            cfg["scenario"]["seed"] = args.seed
        if args.log_rate is not None:
            cfg["output"]["log_rate"] = args.log_rate
        model = build_model(cfg)
        flight = build_flight(cfg)
        arena = build_arena(cfg)
        goal = build_goal(cfg)
        init_spec = build_init(cfg)
        spec = build_scenario(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log_rate = float(cfg["output"]["log_rate"])
    stem = f"{spec.kind}_{spec.seed}"
    header = _log_header(cfg, spec.seed, log_rate, spec.n_drones)

    partial = False
    try:
        result = run_scenario(
            spec, model, flight, arena, goal=goal, init_spec=init_spec, log_rate=log_rate
        )
    except ScenarioAborted as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        result = exc.partial
        partial = True

    dump_config(cfg, out / "config_used.yaml")
    traj_path = out / f"{stem}.traj"
    write_log(traj_path, result.records, header)
    write_events(out / f"{stem}.events", result.events, header)

    records, _ = read_log(traj_path)
    panel = analysis.series_from_records(records)
    csv_header = {"config_hash": header["config_hash"], "seed": spec.seed}
    analysis.write_series_csv(out / f"{stem}_series.csv", panel, csv_header)
    stats = analysis.panel_segment_stats(panel, transient_cut=float(cfg["output"]["transient_cut"]))
    analysis.write_segments_csv(out / f"{stem}_segments.csv", stats, csv_header)

    if spec.kind == "switching":
        _write_transition_report(out / f"{stem}_transitions.csv", result, spec.n_drones)
    if spec.kind == "intruder":
        _write_recovery_report(out / f"{stem}_recoveries.csv", result)

    if partial:
        return EXIT_NUMERIC
    print(f"run complete: {traj_path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args.override or [])
        if "sweep" not in cfg:
            raise ConfigError("sweep", "sweep requires a sweep config")
        if args.workers is not None:
            cfg["sweep"]["workers"] = args.workers
        model = build_model(cfg)
        flight = build_flight(cfg)
        arena = build_arena(cfg)
        goal = build_goal(cfg)
        init_spec = build_init(cfg)
        spec, policy = build_sweep(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    tasks = expand_grid(spec)
    if args.dry_run:
        print(f"{len(tasks)} runs ({len(spec.ali_values)}x{len(spec.att_values)} cells "
              f"x {spec.runs_per_cell} runs)")
        return EXIT_OK

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config_used.yaml")
    results = run_sweep(
        spec, model, flight, arena,
        intruder_policy=policy, goal=goal, init_spec=init_spec,
        transient_cut=float(cfg["output"]["transient_cut"]),
        progress=True,
    )
    header = {"config_hash": config_hash(cfg), "base_seed": spec.base_seed,
              "n_drones": spec.n_drones, "runs_per_cell": spec.runs_per_cell}
    emit_tables(results, out / "heatmap.csv", out / "transect.csv", header)
    for cell in results:
        for failure in cell.failures:
            print(f"cell ({cell.gamma_ali}, {cell.gamma_att}): {failure}", file=sys.stderr)
    if any(cell.run_count == 0 for cell in results):
        return EXIT_PARTIAL
    print(f"sweep complete: {out / 'heatmap.csv'}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for log_path in args.logs:
        try:
            records, header = read_log(log_path)
        except (LogParseError, OSError) as exc:
            print(f"cannot read {log_path}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        try:
            if args.rate is None:
                panel = analysis.series_from_records(records)
            else:
                spec = ResampleSpec(
                    rate=args.rate,
                    smooth_window=args.smooth_window,
                    smooth_degree=args.smooth_degree,
                )
                panel = analysis.series_from_records_resampled(records, spec)
        except ValueError as exc:
            print(f"cannot analyze {log_path}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        stem = Path(log_path).stem
        csv_header = {k: header[k] for k in ("config_hash", "seed") if k in header}
        analysis.write_series_csv(out / f"{stem}_series.csv", panel, csv_header)
        stats = analysis.panel_segment_stats(panel, transient_cut=args.transient_cut)
        analysis.write_segments_csv(out / f"{stem}_segments.csv", stats, csv_header)
        print(f"analyzed {log_path}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="flockphase",
        description="Deterministic drone-swarm flocking simulator and analysis toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--log-rate", type=float, default=None)
    p_run.add_argument("--override", action="append", metavar="KEY=VALUE")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a gain-grid sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.add_argument("--out", default="out")
    p_sweep.add_argument("--dry-run", action="store_true")
    p_sweep.add_argument("--override", action="append", metavar="KEY=VALUE")
    p_sweep.set_defaults(func=cmd_sweep)

    p_an = sub.add_parser("analyze", help="preprocess and measure existing logs")
    p_an.add_argument("logs", nargs="+")
    p_an.add_argument("--rate", type=float, default=None,
                      help="resample to this rate (default: native samples)")
    p_an.add_argument("--smooth-window", type=int, default=0)
    p_an.add_argument("--smooth-degree", type=int, default=2)
    p_an.add_argument("--transient-cut", type=float, default=10.0)
    p_an.add_argument("--out", default="out")
    p_an.set_defaults(func=cmd_analyze)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
