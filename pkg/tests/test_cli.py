"""CLI behaviors: exit codes, output contracts, provenance echo, overrides,
and analyze idempotence."""

import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from flockphase.cli import main


def write_yaml(path, payload):
    path.write_text(yaml.safe_dump(payload))
    return path


@pytest.fixture
def scenario_cfg(tmp_path):
    return write_yaml(
        tmp_path / "run.yaml",
        {
            "scenario": {
                "kind": "baseline",
                "n_drones": 5,
                "seed": 2,
                "baseline": {
                    "gamma_att": 0.5,
                    "ali_start": 0.1,
                    "ali_stop": 0.2,
                    "ali_step": 0.1,
                    "dwell": 20.0,
                },
            }
        },
    )


@pytest.fixture
def sweep_cfg(tmp_path):
    return write_yaml(
        tmp_path / "sweep.yaml",
        {
            "sweep": {
                "ali": {"values": [0.1, 0.4]},
                "att": {"values": [0.5]},
                "n_drones": 5,
                "runs_per_cell": 2,
                "run_duration": 30.0,
                "workers": 2,
            }
        },
    )


class TestRun:
    def test_outputs_and_exit_code(self, scenario_cfg, tmp_path):
        out = tmp_path / "out"
        assert main(["run", "--config", str(scenario_cfg), "--out", str(out)]) == 0
        for name in (
            "baseline_2.traj", "baseline_2.events",
            "baseline_2_series.csv", "baseline_2_segments.csv", "config_used.yaml",
        ):
            assert (out / name).exists(), name

    def test_config_echo_materialized(self, scenario_cfg, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", str(scenario_cfg), "--out", str(out)])
        cfg = yaml.safe_load((out / "config_used.yaml").read_text())
        # every defaulted value is materialized
        assert "model" in cfg and "gamma_acc" in cfg["model"]
        assert cfg["flight"]["time_to_target"] is not None
        assert cfg["scenario"]["baseline"]["dwell"] == 20.0

    def test_rerun_from_echo_reproduces(self, scenario_cfg, tmp_path):
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        main(["run", "--config", str(scenario_cfg), "--out", str(out1)])
        main(["run", "--config", str(out1 / "config_used.yaml"), "--out", str(out2)])
        assert (out1 / "baseline_2.traj").read_bytes() == (out2 / "baseline_2.traj").read_bytes()
        assert (out1 / "baseline_2.events").read_bytes() == (out2 / "baseline_2.events").read_bytes()

    def test_invalid_config_exit_2(self, tmp_path):
        bad = write_yaml(tmp_path / "bad.yaml", {"scenario": {"kind": "nope"}})
        assert main(["run", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2

    def test_unknown_key_exit_2(self, tmp_path):
        bad = write_yaml(
            tmp_path / "bad.yaml",
            {"model": {"gamma_bogus": 1.0}, "scenario": {"kind": "baseline"}},
        )
        assert main(["run", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2

    def test_override_and_seed(self, scenario_cfg, tmp_path):
        out = tmp_path / "out"
        code = main([
            "run", "--config", str(scenario_cfg), "--out", str(out),
            "--seed", "9", "--override", "model.gamma_acc=0.2",
        ])
        assert code == 0
        cfg = yaml.safe_load((out / "config_used.yaml").read_text())
        assert cfg["model"]["gamma_acc"] == 0.2
        assert cfg["scenario"]["seed"] == 9
        assert (out / "baseline_9.traj").exists()

    def test_switching_writes_transition_report(self, tmp_path):
        cfg = write_yaml(
            tmp_path / "sw.yaml",
            {"scenario": {"kind": "switching", "n_drones": 5, "seed": 1,
                          "switching": {"low": 0.075, "high": 0.4, "dwell": 30.0,
                                        "cycles": 1, "gamma_att": 0.5}}},
        )
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        report = (out / "switching_1_transitions.csv").read_text()
        assert "to_school" in report

    def test_intruder_writes_recovery_report(self, tmp_path):
        cfg = write_yaml(
            tmp_path / "intr.yaml",
            {"scenario": {"kind": "intruder", "n_drones": 5, "seed": 1,
                          "intruder": {"ali_start": 0.2, "ali_stop": 0.2,
                                       "ali_step": 0.1, "dwell": 120.0,
                                       "gamma_att": 0.5}}},
        )
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "intruder_1_recoveries.csv").exists()
        series = (out / "intruder_1_series.csv").read_text().splitlines()
        header = [l for l in series if not l.startswith("#")][0]
        assert "intruder_distance" in header


class TestSweepCommand:
    def test_dry_run(self, sweep_cfg, tmp_path, capsys):
        assert main(["sweep", "--config", str(sweep_cfg), "--dry-run"]) == 0
        out = capsys.readouterr().out
        assert "4 runs" in out

    def test_tables_written(self, sweep_cfg, tmp_path):
        out = tmp_path / "sw"
        assert main(["sweep", "--config", str(sweep_cfg), "--out", str(out)]) == 0
        assert (out / "heatmap.csv").exists()
        assert (out / "transect.csv").exists()

    def test_worker_override_does_not_change_tables(self, sweep_cfg, tmp_path):
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        main(["sweep", "--config", str(sweep_cfg), "--out", str(out1), "--workers", "1"])
        main(["sweep", "--config", str(sweep_cfg), "--out", str(out2), "--workers", "3"])
        a = [l for l in (out1 / "heatmap.csv").read_text().splitlines() if not l.startswith("#")]
        b = [l for l in (out2 / "heatmap.csv").read_text().splitlines() if not l.startswith("#")]
        assert a == b


class TestAnalyze:
    def test_idempotent_on_native_log(self, scenario_cfg, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", str(scenario_cfg), "--out", str(out)])
        an = tmp_path / "an"
        code = main(["analyze", str(out / "baseline_2.traj"), "--out", str(an)])
        assert code == 0
        assert (an / "baseline_2_segments.csv").read_bytes() == (
            out / "baseline_2_segments.csv"
        ).read_bytes()
        assert (an / "baseline_2_series.csv").read_bytes() == (
            out / "baseline_2_series.csv"
        ).read_bytes()

    def test_resampled_series(self, scenario_cfg, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", str(scenario_cfg), "--out", str(out)])
        an = tmp_path / "an10"
        code = main([
            "analyze", str(out / "baseline_2.traj"), "--rate", "10", "--out", str(an)
        ])
        assert code == 0
        rows = [
            l for l in (an / "baseline_2_series.csv").read_text().splitlines()
            if not l.startswith("#") and l
        ]
        assert len(rows) - 1 == 401  # 40 s at 10 Hz, endpoints inclusive

    def test_schema_mismatch_exit_2(self, tmp_path):
        bad = tmp_path / "bad.traj"
        bad.write_text("garbage\n")
        assert main(["analyze", str(bad), "--out", str(tmp_path / "x")]) == 2


class TestEntryPoint:
    def test_module_invocation(self, scenario_cfg, tmp_path):
        out = tmp_path / "out"
        proc = subprocess.run(
            [sys.executable, "-m", "flockphase.cli", "run",
             "--config", str(scenario_cfg), "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
