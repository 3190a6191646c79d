import csv
import itertools
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from conftest import bundled_scenario, scipy_joint_cost
from flexv2g import cli
from flexv2g.errors import SolverError
from flexv2g.model import check_feasible, energy_cost, soc_trajectory, total_load
from flexv2g.serialization import (load_document, outcome_from_dict, outcome_to_dict, solution_from_dict,
                                   solution_to_dict)
from flexv2g.sim.experiment import ExperimentResult

GOLDEN = Path(__file__).parent / "golden" / "two_ev_toy_exact.json"


@pytest.fixture(autouse=True)
def out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path))
    return tmp_path


def test_schedule_matches_golden(out_dir, two_ev_toy):
    assert cli.main(["schedule", "two_ev_toy", "--solver", "exact"]) == 0
    produced = solution_from_dict(load_document(out_dir / "two_ev_toy_schedule.json"))
    golden = solution_from_dict(load_document(GOLDEN))
    assert produced.disconnect_times == golden.disconnect_times
    assert produced.social_cost == pytest.approx(golden.social_cost, abs=1e-8)
    # the split of a binding bus between identical-price EVs is not unique; what each EV ends with is
    np.testing.assert_allclose(total_load(produced.allocations), total_load(golden.allocations), atol=1e-6)
    for (params, _), a, b in zip(two_ev_toy.fleet, produced.allocations, golden.allocations):
        assert soc_trajectory(params, a.power_profile, 0.25)[-1] == pytest.approx(
            soc_trajectory(params, b.power_profile, 0.25)[-1], abs=1e-6)
    assert (out_dir / "two_ev_toy_schedule_soc.csv").exists()
    assert (out_dir / "two_ev_toy_schedule_soc.png").stat().st_size > 0


def test_golden_cost_is_optimal(two_ev_toy):
    # the committed golden file agrees with an independent solver
    golden = solution_from_dict(load_document(GOLDEN))
    best = min(scipy_joint_cost(two_ev_toy, tv) for tv in itertools.product(range(9), repeat=2))
    assert golden.social_cost == pytest.approx(best, abs=1e-6)


def test_unknown_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["schedule", "two_ev_toy", "--fast"])
    assert info.value.code == 1
    assert "usage:" in capsys.readouterr().err


def test_single_sweep_admm(out_dir, two_ev_toy):
    out = out_dir / "one.json"
    assert cli.main(["schedule", "two_ev_toy", "--solver", "admm", "--max-sweeps", "1", "--out", str(out),
                     "--no-plots"]) == 0
    sol = solution_from_dict(load_document(out))
    assert sol.converged is False and sol.sweeps_used == 1
    assert check_feasible(two_ev_toy, sol.allocations).ok
    assert not (out_dir / "one_soc.png").exists()


def test_schedule_is_deterministic(out_dir):
    for name in ("a.json", "b.json"):
        assert cli.main(["schedule", "congested_pair", "--solver", "admm", "--seed", "3", "--no-plots",
                         "--out", str(out_dir / name)]) == 0
    assert (out_dir / "a.json").read_bytes() == (out_dir / "b.json").read_bytes()
    assert (out_dir / "a_soc.csv").read_bytes() == (out_dir / "b_soc.csv").read_bytes()


def test_schedule_json_round_trips(out_dir):
    assert cli.main(["schedule", "battery_donor", "--solver", "admm", "--no-plots"]) == 0
    doc = load_document(out_dir / "battery_donor_schedule.json")
    assert solution_to_dict(solution_from_dict(doc)) == doc


def test_solver_failure_exits_2(monkeypatch, capsys):
    def broken(*args, **kwargs):
        raise SolverError("QP solver did not converge", {"primal_residual": 0.5})
    monkeypatch.setattr(cli, "solve_exact", broken)
    assert cli.main(["schedule", "two_ev_toy"]) == 2
    err = capsys.readouterr().err
    assert "did not converge" in err and "primal_residual: 0.5" in err


def test_missing_scenario_exits_1(capsys):
    assert cli.main(["schedule", "no_such_station.json"]) == 1
    assert "cannot read" in capsys.readouterr().err


def test_vcg_single_ev_pays_energy(out_dir):
    assert cli.main(["vcg", "single_ev"]) == 0
    out = outcome_from_dict(load_document(out_dir / "single_ev_vcg.json"))
    sc = bundled_scenario("single_ev")
    own = energy_cost(sc.prices, out.allocations[0].power_profile, sc.interval_hours)
    assert out.payments[0] == pytest.approx(own, abs=1e-9)
    assert out.station_budget == pytest.approx(0.0, abs=1e-9)


def test_vcg_donor_is_paid(out_dir, capsys):
    assert cli.main(["vcg", "battery_donor"]) == 0
    doc = load_document(out_dir / "battery_donor_vcg.json")
    assert doc["payments"][0] < 0
    assert all(doc["ir_satisfied"])
    assert outcome_to_dict(outcome_from_dict(doc)) == doc
    assert "EV 0: payment -" in capsys.readouterr().out


def test_vcg_with_reports(out_dir, tmp_path):
    sc = bundled_scenario("congested_pair")
    reports = [{"desired_disconnect": t.desired_disconnect, "desired_soc": t.desired_soc,
                "temporal_inflexibility": t.temporal_inflexibility * (2 if n == 0 else 1),
                "soc_inflexibility": t.soc_inflexibility} for n, t in enumerate(sc.types)]
    path = tmp_path / "reports.json"
    path.write_text(json.dumps({"reports": reports}))
    assert cli.main(["vcg", "congested_pair", str(path), "--out", str(out_dir / "r.json")]) == 0
    assert len(load_document(out_dir / "r.json")["payments"]) == 2


def test_vcg_missing_reports_exits_1(capsys):
    assert cli.main(["vcg", "congested_pair", "absent_reports.json"]) == 1
    assert "absent_reports.json" in capsys.readouterr().err


def test_vcg_admm_warns(out_dir, capsys):
    assert cli.main(["vcg", "two_ev_toy", "--solver", "admm", "--max-sweeps", "10"]) == 0
    assert "approximate" in capsys.readouterr().err


def test_validate_clean_fixture(capsys):
    assert cli.main(["validate", "two_ev_toy"]) == 0
    assert "2 EVs" in capsys.readouterr().out


def test_validate_locates_rate_violation(capsys):
    assert cli.main(["validate", "rate_violation"]) != 0
    out = capsys.readouterr().out
    assert "rate" in out and "ev 0" in out and "t=2" in out


def test_validate_malformed_file(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"horizon": 4, "interval_hours": 0.25')
    assert cli.main(["validate", str(path)]) == 1
    assert "not valid JSON" in capsys.readouterr().err


def test_experiment_zero_runs_exits_1(capsys):
    assert cli.main(["experiment", "wear_sweep", "--runs", "0"]) == 1
    assert "runs" in capsys.readouterr().err


def test_experiment_outputs(out_dir, tmp_path):
    config = tmp_path / "desk.toml"
    config.write_text('runs = 2\nsolver = "exact"\nmechanism = true\nbaselines = ["naive"]\n'
                      '[station]\nn_ev = 2\nstart_hour = 14.0\nend_hour = 16.0\n'
                      '[sweep]\nbus_capacity = [6.6, 13.2]\n')
    assert cli.main(["experiment", str(config), "--seed", "5"]) == 0
    doc = load_document(out_dir / "desk.json")
    assert doc["seed"] == 5 and doc["config"]["runs"] == 2
    result = ExperimentResult.from_dict(doc)
    assert result.to_dict() == doc
    assert (out_dir / "desk_runs.csv").read_text() == result.to_csv()
    assert (out_dir / "desk_summary.csv").read_text() == result.aggregates_csv()
    assert (out_dir / "desk_summary.png").exists()


@pytest.mark.slow
def test_wear_sweep_schema(out_dir):
    assert cli.main(["experiment", "wear_sweep", "--runs", "1", "--no-plots"]) == 0
    with open(out_dir / "wear_sweep_runs.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert {"wear_cost", "v2g_energy_kwh", "avg_delay_min", "saving_unidirectional"} <= set(rows[0])


@pytest.mark.slow
def test_congestion_sweep_is_byte_identical(tmp_path):
    outputs = []
    for name in ("first", "second"):
        assert cli.main(["experiment", "congestion_sweep", "--seed", "7", "--runs", "3", "--no-plots",
                         "--out-dir", str(tmp_path / name)]) == 0
        outputs.append([(tmp_path / name / f).read_bytes()
                        for f in ("congestion_sweep_runs.csv", "congestion_sweep_summary.csv", "congestion_sweep.json")])
    assert outputs[0] == outputs[1]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "flexv2g", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "schedule" in proc.stdout and "experiment" in proc.stdout
