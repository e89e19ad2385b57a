#!/usr/bin/env python3
"""
Test scenario files, snapshots, ledger CSVs, manifests and the command line
"""

import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from cli_io import (
    LEDGER_FILE,
    MANIFEST_FILE,
    apply_tolerances,
    check_ledger,
    execute_prep,
    execute_run,
    parse_scenario,
    parse_tolerance_overrides,
    read_ledger_csv,
    read_manifest,
    read_snapshot,
    scenario_from_dict,
    write_ledger_csv,
    write_snapshot,
)
from diagnostics import AUDIT_NAMES
from errors import LedgerError, ScenarioError, SnapshotError
from integrator import SimulationState, Tolerances, run
from main import EXIT_ERROR, EXIT_FAILED_AUDIT, run_command
from phase_grid import grid_1d, grid_from_sequence

TINY = """
name: tiny
epsilon: 0.2
grid: {dim: 1, nx: 8, vmax: 4.0, nv: 16}
boundary: {kind: periodic}
initial:
  preset: maxwellian
  params: {rho: 1.0, u: [0.5], T: 1.0, amplitude: 0.3}
time: {horizon: 0.025}
output: {cadence: 1, mollify_widths: [4.0]}
"""


def _write(tmp_path: Path, text: str, name: str = "scenario.yaml") -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


def parse_scenario_text(text: str):
    return scenario_from_dict(yaml.safe_load(text))


def test_minimal_file_uses_defaults(tmp_path):
    scenario = parse_scenario(_write(tmp_path, "name: minimal\n"))
    assert scenario.name == "minimal"
    assert scenario.epsilon == 0.1
    assert scenario.grid.nx == (64,) and scenario.grid.nv == (128,)
    assert scenario.boundary.kind == "inflow"
    assert scenario.picard.max_iterations == 25


def test_scalar_grid_entries_are_replicated(tmp_path):
    scenario = parse_scenario(_write(tmp_path, "grid: {dim: 2, nx: 8, nv: 16, vmax: 4.0}\n"))
    assert scenario.grid.nx == (8, 8)
    assert scenario.grid.lower == (0.0, 0.0)


@pytest.mark.parametrize("text,key_path", [
    ("boundary: {kind: reflection, theta: 1.0}\n", "boundary.theta"),
    ("epsilon: 0\n", "epsilon"),
    ("boundary: {colour: red}\n", "boundary.colour"),
    ("speed: 3\n", "speed"),
    ("grid: {nx: 1}\n", "grid"),
    ("initial: {preset: maxwellian, temperature: 2}\n", "initial.temperature"),
])
def test_scenario_errors_name_the_key(tmp_path, text, key_path):
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(_write(tmp_path, text))
    assert exc.value.key_path == key_path


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ScenarioError):
        parse_scenario(tmp_path / "absent.yaml")
    with pytest.raises(ScenarioError):
        parse_scenario(_write(tmp_path, "grid: [unclosed\n"))


def test_tolerance_overrides():
    scenario = parse_scenario_text("name: t\n")
    updated = apply_tolerances(scenario, parse_tolerance_overrides(["energy=1e-6", "mass = 1e-10"]))
    assert updated.tolerances.energy == 1e-6 and updated.tolerances.mass == 1e-10
    with pytest.raises(ScenarioError):
        parse_tolerance_overrides(["energy"])
    with pytest.raises(ScenarioError) as exc:
        apply_tolerances(scenario, {"speed": 1.0})
    assert exc.value.key_path == "tolerances.speed"


def test_snapshot_round_trip(tmp_path):
    grid = grid_from_sequence(2, [0, -1], [1, 1], [3, 4], 3.0, [6, 8])
    f = np.random.default_rng(1).random(grid.shape)
    path = write_snapshot(SimulationState(f=f, t=0.75), grid, tmp_path / "state.kfps")
    snap = read_snapshot(path, grid)
    assert np.array_equal(snap.f, f)
    assert snap.t == 0.75
    assert snap.spec == grid.spec


def test_snapshot_errors(tmp_path):
    grid = grid_1d(nx=4, nv=8)
    path = write_snapshot(SimulationState(f=np.ones(grid.shape)), grid, tmp_path / "state.kfps")
    with pytest.raises(SnapshotError, match="grid mismatch"):
        read_snapshot(path, grid_1d(nx=5, nv=8))
    raw = path.read_bytes()
    (tmp_path / "short.kfps").write_bytes(raw[:-8])
    with pytest.raises(SnapshotError, match="payload size mismatch"):
        read_snapshot(tmp_path / "short.kfps")
    (tmp_path / "head.kfps").write_bytes(raw[:12])
    with pytest.raises(SnapshotError, match="truncated header"):
        read_snapshot(tmp_path / "head.kfps")
    (tmp_path / "other.kfps").write_bytes(b"NOTASNAP" + raw[8:])
    with pytest.raises(SnapshotError, match="not a snapshot"):
        read_snapshot(tmp_path / "other.kfps")


def test_ledger_csv_round_trip_and_check(tmp_path):
    output = run(parse_scenario_text(TINY))
    path = write_ledger_csv(output.rows, tmp_path / LEDGER_FILE)
    assert path.read_text().splitlines()[0] == "# kfp-ledger schema=3"
    rows = read_ledger_csv(path)
    assert rows == output.rows
    verdicts = check_ledger(rows, Tolerances())
    assert all(v.passed for v in verdicts), [v.name for v in verdicts if not v.passed]


def test_corrupted_energy_column_fails_the_check(tmp_path):
    output = run(parse_scenario_text(TINY))
    rows = [dict(row) for row in output.rows]
    rows[-1]["energy"] += 1.0
    path = write_ledger_csv(rows, tmp_path / LEDGER_FILE)
    verdicts = {v.name: v for v in check_ledger(read_ledger_csv(path), Tolerances())}
    assert not verdicts["energy_slack"].passed
    assert verdicts["entropy_slack"].passed


def test_energy_change_must_match_the_stored_work(tmp_path):
    output = run(parse_scenario_text(TINY))
    rows = [dict(row) for row in output.rows]
    assert rows[-1]["work_scale"] > 0.0
    rows[-1]["work_energy"] += 0.5
    path = write_ledger_csv(rows, tmp_path / LEDGER_FILE)
    verdicts = {v.name: v for v in check_ledger(read_ledger_csv(path), Tolerances())}
    assert not verdicts["energy_slack"].passed
    assert verdicts["energy_slack"].slack == pytest.approx(0.5, rel=0.05)


def test_ledger_schema_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,mass\n0,1\n")
    with pytest.raises(LedgerError):
        read_ledger_csv(bad)
    with pytest.raises(LedgerError):
        read_ledger_csv(tmp_path / "absent.csv")


def test_run_writes_manifest(tmp_path):
    scenario = parse_scenario_text(TINY.replace("mollify_widths: [4.0]}", "mollify_widths: [4.0], snapshot: true}"))
    output, manifest = execute_run(scenario, tmp_path / "out")
    data = read_manifest(tmp_path / "out" / MANIFEST_FILE)
    assert [v["name"] for v in data["verdicts"]] == list(AUDIT_NAMES)
    assert data["scenario_hash"] == scenario.scenario_hash()
    assert data["failures"] == output.failures == []
    assert Path(manifest.outputs["ledger"]).exists()
    final = read_snapshot(manifest.outputs["final_state"])
    assert np.array_equal(final.f, output.final_state.f)


def test_prep_writes_truncated_datum(tmp_path):
    scenario = parse_scenario_text(
        "grid: {nx: 4, nv: 32, vmax: 8.0}\nboundary: {kind: inflow, inflow: initial_trace}\n"
        "initial: {preset: maxwellian, params: {rho: 20.0, T: 2.0}}\n")
    summary, manifest = execute_prep(scenario, [0.5, 0.25, 0.1], tmp_path)
    assert set(summary) == {"initial", "inflow_axis0_lower", "inflow_axis0_upper"}
    assert all(report["monotone"] for report in summary.values())
    snap = read_snapshot(manifest.outputs["initial"])
    assert snap.f.max() <= 1.0 / scenario.epsilon


def test_command_exit_codes(tmp_path):
    scenario = _write(tmp_path, TINY)
    assert run_command(["run", "-s", str(scenario), "-o", str(tmp_path / "ok")]) == 0
    ledger = tmp_path / "ok" / LEDGER_FILE
    assert run_command(["check", str(ledger)]) == 0
    failing = run_command(["run", "-s", str(scenario), "-o", str(tmp_path / "strict"), "-t", "mass=-1"])
    assert failing == EXIT_FAILED_AUDIT
    broken = _write(tmp_path, TINY.replace("epsilon: 0.2", "epsilon: 0"), "broken.yaml")
    assert run_command(["run", "-s", str(broken), "-o", str(tmp_path / "bad")]) == EXIT_ERROR


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
