"""Acceptance gate: every headline claim is measured end to end at its
stated tolerance and reported as one pass/fail line.

The heavy fixtures (gain transects, intruder condition, scaling) are shared
across criteria and executed in parallel; the full module is sized to run in
minutes on a small machine.
"""

import math
import os
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from flockphase import (
    ArenaSpec,
    FlightParams,
    GainSchedule,
    IntruderPolicy,
    ModelParams,
    ResampleSpec,
    ScenarioSpec,
    SweepSpec,
    make_intruder,
    make_switching,
    random_baseline,
    recovery_time,
    run_scenario,
    run_sweep,
    transition_time,
)
from flockphase.analysis import series_from_records, series_from_records_resampled
from flockphase.sweep import CellResult

WORKERS = max(2, (os.cpu_count() or 2))
ARENA = ArenaSpec()
FLIGHT = FlightParams()
MODEL = ModelParams()

RUNS_PER_CELL = 20
RUN_DURATION = 300.0
TRANSECT_ALI = [round(0.025 * k, 10) for k in range(1, 17)]          # 0.025..0.4
REFINED_ALI = [round(0.025 + 0.0125 * k, 10) for k in range(11)]     # 0.025..0.15
N20_ALI = [round(0.025 + 0.0125 * k, 10) for k in range(23)]         # 0.025..0.3


def report(name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")


def cells_by_ali(cells: list[CellResult]) -> dict[float, CellResult]:
    return {c.gamma_ali: c for c in cells}


@pytest.fixture(scope="module")
def baseline_transect():
    spec = SweepSpec(
        ali_values=TRANSECT_ALI, att_values=[0.5], n_drones=10,
        runs_per_cell=RUNS_PER_CELL, run_duration=RUN_DURATION,
        base_seed=100, workers=WORKERS,
    )
    t0 = time.perf_counter()
    cells = run_sweep(spec, MODEL, FLIGHT, ARENA)
    elapsed = time.perf_counter() - t0
    return cells_by_ali(cells), elapsed


@pytest.fixture(scope="module")
def refined_transect():
    spec = SweepSpec(
        ali_values=REFINED_ALI, att_values=[0.5], n_drones=10,
        runs_per_cell=RUNS_PER_CELL, run_duration=RUN_DURATION,
        base_seed=200, workers=WORKERS,
    )
    return cells_by_ali(run_sweep(spec, MODEL, FLIGHT, ARENA))


@pytest.fixture(scope="module")
def intruder_transect():
    spec = SweepSpec(
        ali_values=TRANSECT_ALI, att_values=[0.5], n_drones=10,
        runs_per_cell=RUNS_PER_CELL, run_duration=RUN_DURATION,
        base_seed=300, workers=WORKERS,
    )
    return cells_by_ali(run_sweep(spec, MODEL, FLIGHT, ARENA, intruder_policy=IntruderPolicy()))


@pytest.fixture(scope="module")
def n20_transect():
    spec = SweepSpec(
        ali_values=N20_ALI, att_values=[0.5], n_drones=20,
        runs_per_cell=RUNS_PER_CELL, run_duration=RUN_DURATION,
        base_seed=400, workers=WORKERS,
    )
    return cells_by_ali(run_sweep(spec, MODEL, FLIGHT, ARENA))


class TestPhaseTransition:
    def test_criterion(self, baseline_transect):
        cells, elapsed = baseline_transect
        low_ok = cells[0.025].mean_P <= 0.45
        plateau = [a for a in TRANSECT_ALI if a >= 0.15]
        plateau_ok = all(cells[a].mean_P >= 0.85 for a in plateau)
        ratio_ok = cells[0.1].mean_P >= 0.9 * cells[0.4].mean_P
        ok = low_ok and plateau_ok and ratio_ok
        report(
            "phase-transition",
            ok,
            f"P(0.025)={cells[0.025].mean_P:.3f} min plateau P="
            f"{min(cells[a].mean_P for a in plateau):.3f} "
            f"P(0.1)={cells[0.1].mean_P:.3f} vs 0.9*P(0.4)={0.9 * cells[0.4].mean_P:.3f}; "
            f"{elapsed:.0f}s",
        )
        assert elapsed <= 300.0, "runtime target exceeded"
        assert low_ok, "swarming state too polarized at gamma_ali=0.025"
        assert plateau_ok, "schooling plateau below 0.85"
        assert ratio_ok, "polarization not saturated at gamma_ali=0.1"

    def test_runtime_line(self, baseline_transect):
        _, elapsed = baseline_transect
        print(f"ACCEPTANCE phase-transition-runtime: {elapsed:.0f}s for "
              f"{len(TRANSECT_ALI) * RUNS_PER_CELL} runs")


class TestSusceptibilityPeak:
    def test_criterion(self, refined_transect):
        chi = {a: refined_transect[a].chi_P for a in REFINED_ALI}
        peak = max(chi, key=chi.get)
        ok = 0.05 <= peak <= 0.10
        report("susceptibility-peak", ok, f"argmax chi_P = {peak} (chi={chi[peak]:.3f})")
        assert ok

    def test_peak_is_interior_maximum(self, refined_transect):
        chi = {a: refined_transect[a].chi_P for a in REFINED_ALI}
        peak = max(chi, key=chi.get)
        assert chi[peak] > chi[REFINED_ALI[0]]
        assert chi[peak] > chi[REFINED_ALI[-1]]


class TestDispersionMonotonicity:
    def test_criterion(self, baseline_transect):
        cells, _ = baseline_transect
        ds = [cells[a].mean_D for a in TRANSECT_ALI]
        rho = float(spearmanr(TRANSECT_ALI, ds).statistic)
        ok = rho <= -0.8
        report("dispersion-monotonicity", ok, f"spearman rho = {rho:.3f}")
        assert ok


class TestIntruderShift:
    @staticmethod
    def saturation_point(cells: dict[float, CellResult]) -> float | None:
        for a in TRANSECT_ALI:
            if cells[a].mean_P >= 0.85:
                return a
        return None

    def test_criterion(self, baseline_transect, intruder_transect):
        base, _ = baseline_transect
        base_sat = self.saturation_point(base)
        intr_sat = self.saturation_point(intruder_transect)
        assert base_sat is not None, "baseline never saturates"
        # a saturation point beyond the grid is at least 0.4 + one step
        effective_intr = intr_sat if intr_sat is not None else TRANSECT_ALI[-1] + 0.025
        shift_ok = effective_intr >= 2.0 * base_sat
        chi_alis = [a for a in TRANSECT_ALI if a >= 0.15]
        chi_ok = all(
            intruder_transect[a].chi_P > base[a].chi_P for a in chi_alis
        )
        ok = shift_ok and chi_ok
        report(
            "intruder-shift",
            ok,
            f"baseline sat={base_sat}, intruder sat={intr_sat}, "
            f"chi excess on {sum(intruder_transect[a].chi_P > base[a].chi_P for a in chi_alis)}"
            f"/{len(chi_alis)} points",
        )
        assert shift_ok, "intruder saturation not shifted by 2x"
        assert chi_ok, "intrusion susceptibility does not exceed baseline everywhere >= 0.15"


class TestSwitchingAsymmetry:
    def test_criterion(self):
        ups, downs = [], []
        for seed in range(10):
            spec = make_switching(10, 0.075, 0.4, 60.0, 5, seed=seed)
            res = run_scenario(spec, MODEL, FLIGHT, ARENA)
            bounds = spec.schedule.boundaries()
            for k, (t0, t1, ali, _) in enumerate(bounds):
                if k == 0:
                    continue
                direction = "to_school" if ali == 0.4 else "to_swarm"
                mask = res.t <= t1 + 1e-9  # confine detection to the dwell
                elapsed = transition_time(res.t[mask], res.P[mask], t0, direction, 10)
                value = elapsed if elapsed is not None else math.inf
                (ups if direction == "to_school" else downs).append(value)
        up_median = float(np.median(ups))
        down_median = float(np.median(downs))
        ratio = down_median / up_median if up_median > 0 else math.inf
        ok = 2.0 <= up_median <= 10.0 and 8.0 <= down_median <= 40.0 and ratio >= 2.0
        report(
            "switching-asymmetry",
            ok,
            f"median to_school={up_median:.1f}s, to_swarm={down_median:.1f}s, "
            f"ratio={ratio:.1f} ({np.isinf(downs).sum()}/{len(downs)} undetected)",
        )
        assert 2.0 <= up_median <= 10.0, "swarm->school transition outside [2, 10] s"
        assert 8.0 <= down_median <= 40.0, "school->swarm transition outside [8, 40] s"
        assert ratio >= 2.0, "asymmetry ratio below 2"


class TestIntruderRecovery:
    def test_criterion(self):
        times = []
        n_windows = 0
        for seed in range(4):
            spec = make_intruder(
                10, GainSchedule.constant(420.0, 0.225, 0.5),
                IntruderPolicy(), seed=seed,
            )
            res = run_scenario(spec, MODEL, FLIGHT, ARENA)
            for t_open, t_close in res.windows:
                # windows need a full pre-intrusion baseline
                if t_close is None or t_open < 10.0:
                    continue
                n_windows += 1
                elapsed = recovery_time(res.t, res.P, (t_open, t_close))
                times.append(elapsed if elapsed is not None else math.inf)
        assert n_windows >= 20, f"only {n_windows} usable intrusion windows"
        arr = np.array(times)
        median = float(np.median(arr))
        frac = float(np.isfinite(arr).mean())
        ok = median <= 10.0 and frac >= 0.8
        report(
            "intruder-recovery",
            ok,
            f"{n_windows} windows, median recovery={median:.1f}s, recovered={frac:.0%}",
        )
        assert median <= 10.0, "median recovery above 10 s"
        assert frac >= 0.8, "fewer than 80% of windows recover"


class TestSwarmSizeScaling:
    def test_criterion(self, refined_transect, n20_transect):
        chi10 = {a: refined_transect[a].chi_P for a in REFINED_ALI}
        chi20 = {a: n20_transect[a].chi_P for a in N20_ALI}
        peak10 = max(chi10, key=chi10.get)
        peak20 = max(chi20, key=chi20.get)
        factor = peak20 / peak10
        ok = 1.5 <= factor <= 3.0
        report(
            "swarm-size-scaling",
            ok,
            f"chi peak N=10 at {peak10}, N=20 at {peak20}, factor={factor:.2f}",
        )
        assert ok


class TestPipelineSelfConsistency:
    def test_criterion(self):
        spec = ScenarioSpec(
            "baseline", 10, RUN_DURATION,
            GainSchedule.constant(RUN_DURATION, 0.3, 0.5), seed=11,
        )
        res = run_scenario(spec, MODEL, FLIGHT, ARENA, log_rate=10.0)
        truth = series_from_records(res.records)
        # 1 Hz downsample of the same log
        coarse = [r for r in res.records if abs(r.time - round(r.time)) < 1e-9]
        rebuilt = series_from_records_resampled(coarse, ResampleSpec(rate=10.0))
        # compare on the shared grid, after the transient, in the schooling state
        mask_truth = truth.t >= 10.0
        mask_rebuilt = rebuilt.t >= 10.0
        t_t = truth.t[mask_truth]
        t_r = rebuilt.t[mask_rebuilt]
        n = min(t_t.size, t_r.size)
        assert np.allclose(t_t[:n], t_r[:n], atol=1e-6)
        dP = truth.P[mask_truth][:n] - rebuilt.P[mask_rebuilt][:n]
        rms = float(np.sqrt(np.mean(dP**2)))
        ok = rms <= 0.05
        report("pipeline-self-consistency", ok, f"P reconstruction RMS={rms:.4f}")
        assert ok

    def test_position_reconstruction(self):
        # 1 Hz positions -> interpolant -> 10 Hz positions within 5 cm RMS
        spec = ScenarioSpec(
            "baseline", 10, 120.0, GainSchedule.constant(120.0, 0.3, 0.5), seed=12
        )
        res = run_scenario(spec, MODEL, FLIGHT, ARENA, log_rate=10.0)
        from flockphase.trajio import Resampled, records_to_tracks

        tracks = records_to_tracks(res.records)
        errs = []
        for a, entry in tracks.items():
            t, pos = entry["t"], entry["pos"]
            coarse = np.abs(t - np.round(t)) < 1e-9
            rs = Resampled(t[coarse], pos[coarse], t)
            interior = (t >= t[coarse][0]) & (t <= t[coarse][-1]) & (t >= 10.0)
            errs.append(np.linalg.norm(rs.values[interior] - pos[interior], axis=1))
        rms = float(np.sqrt(np.mean(np.concatenate(errs) ** 2)))
        ok = rms <= 0.05
        report("position-reconstruction", ok, f"RMS={rms * 100:.2f} cm")
        assert ok


class TestPropertySuites:
    """Always-run invariants at fixed tolerances (no drift)."""

    def test_analytic_zeros_and_parities(self):
        from flockphase.model import PairGeometry
        from flockphase import (
            alignment_turn, attraction_turn, intruder_turn,
            speed_interaction, vertical_interaction,
        )

        p = MODEL
        assert speed_interaction(PairGeometry(0.2, 0.1, 0.0, p.d0_v), p) == 0.0
        assert vertical_interaction(PairGeometry(0, 0, p.d0_z, 3.0), p) == 0.0
        assert alignment_turn(PairGeometry(0.5, 0.0, 0.0, 5.0), p) == 0.0
        assert attraction_turn(PairGeometry(0.9, 0.0, 0.0, p.d0_att), p) == 0.0
        assert intruder_turn(PairGeometry(math.pi, 0.0, 0.0, 5.0), p) == pytest.approx(0.0, abs=1e-12)
        rng = np.random.default_rng(0)
        for _ in range(200):
            dphi = rng.uniform(-3, 3)
            psi = rng.uniform(-3, 3)
            d = rng.uniform(0.5, 30)
            assert alignment_turn(PairGeometry(0.3, dphi, 0, d), p) == pytest.approx(
                -alignment_turn(PairGeometry(0.3, -dphi, 0, d), p), abs=1e-12
            )
            assert attraction_turn(PairGeometry(psi, 0, 0, d), p) == pytest.approx(
                -attraction_turn(PairGeometry(-psi, 0, 0, d), p), abs=1e-12
            )
            assert intruder_turn(PairGeometry(psi, 0, 0, d), p) == pytest.approx(
                -intruder_turn(PairGeometry(-psi, 0, 0, d), p), abs=1e-12
            )
        report("property-zeros-parities", True, "1e-12")

    def test_relax_matches_closed_form(self):
        from flockphase import relax_step

        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(500):
            tau = rng.uniform(0.05, 10)
            dt = rng.uniform(0.001, 2.0)
            fp = FlightParams(tau=tau, dt_phys=dt, dt_ctrl=dt)
            x, xd = rng.uniform(-100, 100, 2)
            got = relax_step(np.array([x]), np.array([xd]), fp)[0]
            want = xd + (x - xd) * math.exp(-dt / tau)
            worst = max(worst, abs(got - want))
        assert worst < 1e-12
        report("property-relax-closed-form", True, f"max err {worst:.1e}")

    def test_determinism_byte_for_byte(self, tmp_path):
        from flockphase.trajio import write_events, write_log

        def produce(tag):
            spec = make_intruder(6, GainSchedule.constant(60.0, 0.2, 0.5), seed=9)
            res = run_scenario(spec, MODEL, FLIGHT, ARENA, log_rate=2.0)
            traj = tmp_path / f"{tag}.traj"
            events = tmp_path / f"{tag}.events"
            write_log(traj, res.records, {"seed": 9})
            write_events(events, res.events, {"seed": 9})
            return traj.read_bytes(), events.read_bytes()

        a, b = produce("a"), produce("b")
        ok = a == b
        report("property-determinism", ok, "byte-identical trajectory and event logs")
        assert ok

    def test_worker_count_independence(self):
        spec1 = SweepSpec(
            ali_values=[0.05, 0.2], att_values=[0.5], n_drones=6,
            runs_per_cell=2, run_duration=60.0, base_seed=5, workers=1,
        )
        spec4 = SweepSpec(
            ali_values=[0.05, 0.2], att_values=[0.5], n_drones=6,
            runs_per_cell=2, run_duration=60.0, base_seed=5, workers=4,
        )
        a = run_sweep(spec1, MODEL, FLIGHT, ARENA)
        b = run_sweep(spec4, MODEL, FLIGHT, ARENA)
        ok = a == b
        report("property-worker-independence", ok, "1 vs 4 workers identical")
        assert ok

    def test_selection_matches_bruteforce(self):
        from conftest import random_agents
        from flockphase import (
            pair_geometry, pair_influence, select_influential,
            speed_interaction, vertical_interaction, alignment_turn, attraction_turn,
        )

        rng = np.random.default_rng(2)
        p = MODEL
        for _ in range(100):
            n = int(rng.integers(2, 9))
            agents = random_agents(rng, n)
            focal, others = agents[0], agents[1:]
            got = select_influential(focal, others, p)
            scored = []
            v_eff = max(focal.speed_h, p.v_min)
            for other in others:
                g = pair_geometry(focal, other, p.sigma_z)
                c = (
                    speed_interaction(g, p),
                    vertical_interaction(g, p),
                    alignment_turn(g, p) + attraction_turn(g, p),
                )
                scored.append((-pair_influence(c, v_eff), g.d_c, other.id))
            scored.sort()
            assert got == [s[2] for s in scored[: p.k_neighbors]]
        report("property-selection-bruteforce", True, "N <= 8")

    def test_preprocessing_properties(self):
        from flockphase import differentiate, resample, smooth

        rng = np.random.default_rng(3)
        t = np.arange(0.0, 30.0, 1.0)
        y = rng.normal(size=(t.size, 3))
        rs = resample(t, y, ResampleSpec(rate=1.0))
        knots_ok = np.allclose(rs.values, y, atol=1e-12)

        line = np.outer(t, [1.5, -2.0, 0.25])
        rs2 = resample(t, line, ResampleSpec(rate=7.0))
        deriv_ok = np.allclose(differentiate(rs2), [[1.5, -2.0, 0.25]] * rs2.t.size, atol=1e-9)

        tt = np.linspace(0, 10, 101)
        poly = 2.0 * tt**2 - 3.0 * tt + 1.0
        sm = smooth(poly, ResampleSpec(rate=10, smooth_window=9, smooth_degree=2))
        poly_ok = np.abs(sm - poly).max() < 1e-9

        ok = knots_ok and deriv_ok and poly_ok
        report("property-preprocessing", ok, "knots, analytic derivative, polynomial preservation")
        assert ok
