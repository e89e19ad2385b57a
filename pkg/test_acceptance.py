#!/usr/bin/env python3
"""
Run the shipped scenarios on coarsened grids and audit them end to end
"""

import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from cli_io import LEDGER_FILE, execute_check, parse_scenario, scenario_from_dict
from integrator import Scenario, Tolerances, epsilon_sweep, run
from main import run_command

SCENARIO_DIR = Path(__file__).parent / "scenarios"
COARSE_GRID = {"dim": 1, "nx": 16, "vmax": 8.0, "nv": 64}


def _load(name: str, horizon: float = 0.1, **sections) -> Scenario:
    """A shipped scenario with a coarse grid and a short horizon."""
    with open(SCENARIO_DIR / f"{name}.yaml") as f:
        data = yaml.safe_load(f)
    data["grid"] = dict(COARSE_GRID)
    data.setdefault("time", {})["horizon"] = horizon
    data.setdefault("output", {})["cadence"] = 2
    for key, value in sections.items():
        data.setdefault(key, {}).update(value)
    return scenario_from_dict(data)


def _verdicts(output):
    return {v.name: v for v in output.verdicts}


@pytest.mark.parametrize("name", ["bimodal_inflow", "box_inflow", "equilibrium", "reflection", "smooth_order2"])
def test_shipped_scenarios_parse(name):
    scenario = parse_scenario(SCENARIO_DIR / f"{name}.yaml")
    assert scenario.name == name


def test_bimodal_inflow_passes_every_audit():
    output = run(_load("bimodal_inflow"))
    assert output.passed, output.failures
    verdicts = _verdicts(output)
    assert verdicts["mass_ledger"].slack <= 1e-12
    assert verdicts["mollification_chain"].passed
    assert verdicts["reflection_flux_identity"].detail == "not applicable"


def test_box_entropy_inequality():
    output = run(_load("box_inflow"))
    verdicts = _verdicts(output)
    assert verdicts["entropy_inequality"].passed
    assert verdicts["dissipation_nonnegative"].passed
    assert max(row["entropy_slack"] for row in output.rows) <= 1e-6
    assert output.passed, output.failures


@pytest.mark.parametrize("theta", [0.0, 0.5, 0.9])
def test_reflection_identities(theta):
    output = run(_load("reflection", boundary={"theta": theta}))
    verdicts = _verdicts(output)
    assert verdicts["reflection_flux_identity"].passed
    assert verdicts["mass_ledger"].passed
    assert verdicts["energy_inequality"].passed
    assert output.passed, output.failures


def test_equilibrium_run_exits_cleanly(tmp_path):
    with open(SCENARIO_DIR / "equilibrium.yaml") as f:
        data = yaml.safe_load(f)
    data["grid"] = dict(COARSE_GRID)
    data["time"]["horizon"] = 0.1
    path = tmp_path / "equilibrium.yaml"
    path.write_text(yaml.safe_dump(data))
    assert run_command(["run", "-s", str(path), "-o", str(tmp_path / "out")]) == 0
    verdicts = execute_check(tmp_path / "out" / LEDGER_FILE, Tolerances())
    assert all(v.passed for v in verdicts)


def test_nonnegativity_across_scenarios():
    for name in ("bimodal_inflow", "box_inflow", "reflection"):
        output = run(_load(name))
        max_f = max(float(np.max(output.final_state.f)), 1e-300)
        assert min(row["min_f"] for row in output.rows) >= -1e-14 * max_f


def test_epsilon_sweep_is_uniform():
    scenario = _load("bimodal_inflow", horizon=0.05, data={"truncate": False}, output={"mollify_widths": []})
    report = epsilon_sweep(scenario, [0.4, 0.2, 0.1, 0.05])
    assert report.bounds["m3_ratio"] < 2.0
    assert report.bounds["fisher_ratio"] < 2.0
    assert report.bounds["uniform"]


def test_repeated_runs_are_bit_identical():
    scenario = _load("reflection", horizon=0.05)
    first = run(scenario, workers=1)
    second = run(scenario, workers=4)
    assert np.array_equal(first.final_state.f, second.final_state.f)
    assert first.rows == second.rows


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
