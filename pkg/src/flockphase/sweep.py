"""Parallel phase-diagram engine: expands gain grids into independently
seeded runs, executes them across workers, and aggregates per-cell statistics
into heatmap/transect tables.

Outputs are a pure function of (spec, defaults): seeds are content-hashed per
cell and results are merged in a fixed order, so worker count never changes
the tables.
"""

from __future__ import annotations

import hashlib
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .params import ArenaSpec, FlightParams, InitSpec, ModelParams, NavGoal
from .scenarios import (
    GainSchedule,
    IntruderPolicy,
    ScenarioAborted,
    ScenarioSpec,
    run_scenario,
)


@dataclass
class SweepSpec:
    """A gain grid with per-cell replication."""

    ali_values: list[float]
    att_values: list[float]
    n_drones: int = 10
    runs_per_cell: int = 10
    run_duration: float = 300.0
    base_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.ali_values or not self.att_values:
            raise ValueError("gain grids must be non-empty")
        if self.runs_per_cell < 1:
            raise ValueError("runs_per_cell must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class Task:
    """One independent run of one grid cell."""

    gamma_ali: float
    gamma_att: float
    run_index: int
    seed: int


@dataclass
class CellResult:
    """Aggregates of one grid cell over its successful runs."""

    gamma_ali: float
    gamma_att: float
    mean_P: float
    std_P: float
    mean_D: float
    std_D: float
    chi_P: float
    mean_mindist: float
    std_mindist: float
    run_count: int
    failures: list[str] = field(default_factory=list)


def task_seed(base_seed: int, gamma_ali: float, gamma_att: float, run_index: int) -> int:
    """Stable per-run seed: a content hash of the cell coordinates, so each
    cell is reproducible in isolation."""
    key = f"{base_seed}|{gamma_ali:.10g}|{gamma_att:.10g}|{run_index}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def expand_grid(spec: SweepSpec) -> list[Task]:
    """Cartesian product of the gain grids times the per-cell replication,
    in emission order (gamma_att outer, gamma_ali inner)."""
    tasks = []
    for att in spec.att_values:
        for ali in spec.ali_values:
            for run in range(spec.runs_per_cell):
                tasks.append(Task(ali, att, run, task_seed(spec.base_seed, ali, att, run)))
    return tasks


@dataclass
class _RunStats:
    mean_P: float
    mean_D: float
    chi_P: float
    mean_mindist: float
    n_samples: int


def _run_task(args) -> tuple[int, _RunStats | None, str | None]:
    (index, task, n_drones, duration, model, fp, arena, goal, init_spec,
     intruder_policy, transient_cut) = args
    try:
        schedule = GainSchedule.constant(duration, task.gamma_ali, task.gamma_att)
        spec = ScenarioSpec(
            kind="intruder" if intruder_policy else "baseline",
            n_drones=n_drones,
            duration=duration,
            schedule=schedule,
            intruder_policy=intruder_policy,
            seed=task.seed,
        )
        result = run_scenario(spec, model, fp, arena, goal=goal, init_spec=init_spec)
        mask = result.t >= transient_cut - 1e-9
        if intruder_policy:
            mask &= result.in_window
        if not mask.any():
            return index, None, "no samples in the analysis window"
        P, D, mind = result.P[mask], result.D[mask], result.min_dist[mask]
        stats = _RunStats(
            mean_P=float(P.mean()),
            mean_D=float(D.mean()),
            chi_P=float(n_drones * P.var()),
            mean_mindist=float(mind.mean()),
            n_samples=int(P.size),
        )
        return index, stats, None
    except ScenarioAborted as exc:
        return index, None, f"diverged: {exc}"
    except Exception as exc:  # recorded, never silently dropped
        return index, None, f"{type(exc).__name__}: {exc}"


def run_sweep(
    spec: SweepSpec,
    model: ModelParams,
    fp: FlightParams,
    arena: ArenaSpec,
    intruder_policy: IntruderPolicy | None = None,
    goal: NavGoal | None = None,
    init_spec: InitSpec | None = None,
    transient_cut: float = 10.0,
    progress: bool = False,
) -> list[CellResult]:
    """Execute every task of the grid and aggregate per cell.

    Failed runs are recorded on their cell; a cell where every run failed has
    NaN aggregates and run_count 0.
    """
    tasks = expand_grid(spec)
    args = [
        (i, task, spec.n_drones, spec.run_duration, model, fp, arena, goal,
         init_spec, intruder_policy, transient_cut)
        for i, task in enumerate(tasks)
    ]
    outcomes: list[tuple[int, _RunStats | None, str | None]] = []
    if spec.workers <= 1:
        for a in args:
            outcomes.append(_run_task(a))
            if progress:
                print(f"sweep: {len(outcomes)}/{len(args)} runs", file=sys.stderr)
    else:
        chunk = max(1, len(args) // (spec.workers * 8))
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            for out in pool.map(_run_task, args, chunksize=chunk):
                outcomes.append(out)
                if progress and len(outcomes) % 25 == 0:
                    print(f"sweep: {len(outcomes)}/{len(args)} runs", file=sys.stderr)
    outcomes.sort(key=lambda o: o[0])

    results: list[CellResult] = []
    per_cell = spec.runs_per_cell
    idx = 0
    for att in spec.att_values:
        for ali in spec.ali_values:
            stats = []
            failures = []
            for _ in range(per_cell):
                _, run_stats, error = outcomes[idx]
                task = tasks[idx]
                idx += 1
                if run_stats is not None:
                    stats.append(run_stats)
                else:
                    failures.append(f"run {task.run_index} (seed {task.seed}): {error}")
            if stats:
                mean_p = np.array([s.mean_P for s in stats])
                mean_d = np.array([s.mean_D for s in stats])
                mind = np.array([s.mean_mindist for s in stats])
                chi = np.array([s.chi_P for s in stats])
                cell = CellResult(
                    gamma_ali=ali,
                    gamma_att=att,
                    mean_P=float(mean_p.mean()),
                    std_P=float(mean_p.std()),
                    mean_D=float(mean_d.mean()),
                    std_D=float(mean_d.std()),
                    chi_P=float(chi.mean()),
                    mean_mindist=float(mind.mean()),
                    std_mindist=float(mind.std()),
                    run_count=len(stats),
                    failures=failures,
                )
            else:
                nan = float("nan")
                cell = CellResult(ali, att, nan, nan, nan, nan, nan, nan, nan, 0, failures)
            results.append(cell)
    return results


HEATMAP_COLUMNS = ("gamma_ali", "gamma_att", "mean_P", "mean_D", "chi_P", "mean_mindist", "run_count")
TRANSECT_COLUMNS = HEATMAP_COLUMNS + ("std_P", "std_D", "std_mindist")


def _fmt(x) -> str:
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".9g")


def emit_tables(
    results: list[CellResult],
    heatmap_path,
    transect_path,
    header: dict | None = None,
) -> None:
    """Write the heatmap and transect CSVs in stable row order (gamma_att
    outer, gamma_ali inner). Re-emitting the same results is byte-identical."""
    if not results:
        raise ValueError("no results to emit")
    ordered = sorted(results, key=lambda c: (c.gamma_att, c.gamma_ali))

    def _write(path, columns, with_std: bool) -> None:
        with Path(path).open("w") as fh:
            fh.write("# flockphase-sweep v1\n")
            for key in sorted(header or {}):
                fh.write(f"# {key}: {header[key]}\n")
            fh.write(",".join(columns) + "\n")
            for c in ordered:
                row = [
                    _fmt(c.gamma_ali), _fmt(c.gamma_att), _fmt(c.mean_P), _fmt(c.mean_D),
                    _fmt(c.chi_P), _fmt(c.mean_mindist), str(c.run_count),
                ]
                if with_std:
                    row += [_fmt(c.std_P), _fmt(c.std_D), _fmt(c.std_mindist)]
                fh.write(",".join(row) + "\n")

    _write(heatmap_path, HEATMAP_COLUMNS, with_std=False)
    _write(transect_path, TRANSECT_COLUMNS, with_std=True)
