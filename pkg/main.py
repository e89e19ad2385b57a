#!/usr/bin/env python3
"""
Kinetic Fokker-Planck Harness - Command Line

Runs regularized kinetic Fokker-Planck scenarios and audits the discrete
mass, energy and entropy balances they must satisfy.
"""

import logging
import sys
from pathlib import Path
from typing import List, Optional

import typer
from rich.logging import RichHandler

from cli_io import (
    apply_tolerances,
    execute_check,
    execute_prep,
    execute_run,
    execute_sweep,
    load_scenario_snapshots,
    parse_scenario,
    parse_tolerance_overrides,
)
from errors import KineticError
from integrator import Scenario
from ui import (
    console,
    show_banner,
    show_convergence,
    show_error_message,
    show_failure_summary,
    show_measurements,
    show_outputs,
    show_success_message,
    show_sweep,
    show_verdicts,
)

EXIT_FAILED_AUDIT = 1
EXIT_ERROR = 2

# Initialize Typer app
app = typer.Typer(help="Kinetic Fokker-Planck Harness - solve, then audit the balance laws", add_completion=False)


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
        force=True,
    )


def _load(scenario_path: Path, tolerance: Optional[List[str]]) -> Scenario:
    scenario = parse_scenario(scenario_path)
    return apply_tolerances(scenario, parse_tolerance_overrides(tolerance or []))


def _parse_eps(eps: str) -> List[float]:
    try:
        values = [float(item) for item in eps.split(",") if item.strip()]
    except ValueError as e:
        raise typer.BadParameter(f"expected a comma-separated list of numbers, got '{eps}'") from e
    if not values:
        raise typer.BadParameter("epsilon list is empty")
    return values


def _finish(failures: List[str], message: str) -> None:
    if failures:
        show_failure_summary(failures)
        raise typer.Exit(EXIT_FAILED_AUDIT)
    show_success_message(message)


ScenarioOption = typer.Option(..., "--scenario", "-s", exists=True, dir_okay=False, help="Scenario YAML file")
OutOption = typer.Option(Path("out"), "--out", "-o", help="Output directory")
WorkersOption = typer.Option(1, "--workers", "-w", min=1, help="Worker threads for the collision solves")
ToleranceOption = typer.Option(None, "--tolerance", "-t", help="Tolerance override key=value (repeatable)")
LogLevelOption = typer.Option("INFO", "--log-level", help="DEBUG, INFO, WARNING or ERROR")


@app.command()
def run(
    scenario: Path = ScenarioOption,
    out: Path = OutOption,
    workers: int = WorkersOption,
    tolerance: Optional[List[str]] = ToleranceOption,
    log_level: str = LogLevelOption,
):
    """Run one scenario, write ledger.csv and manifest.json, and audit it."""
    configure_logging(log_level)
    try:
        spec = _load(scenario, tolerance)
        show_banner("run", spec.name, spec.scenario_hash())
        output, manifest = execute_run(spec, out, workers, load_scenario_snapshots(spec, scenario.parent))
    except KineticError as e:
        show_error_message(str(e))
        raise typer.Exit(EXIT_ERROR)
    show_verdicts(output.verdicts)
    show_measurements(output.measurements)
    show_outputs(manifest.outputs)
    _finish(manifest.failures, "All audits passed")


@app.command()
def check(
    ledger: Path = typer.Argument(..., exists=True, dir_okay=False, help="ledger.csv written by run"),
    scenario: Optional[Path] = typer.Option(None, "--scenario", "-s", help="Scenario supplying tolerances"),
    tolerance: Optional[List[str]] = ToleranceOption,
    log_level: str = LogLevelOption,
):
    """Re-audit a ledger CSV from its own columns."""
    configure_logging(log_level)
    try:
        if scenario is not None:
            tolerances = _load(scenario, tolerance).tolerances
        else:
            tolerances = apply_tolerances(Scenario(), parse_tolerance_overrides(tolerance or [])).tolerances
        verdicts = execute_check(ledger, tolerances)
    except KineticError as e:
        show_error_message(str(e))
        raise typer.Exit(EXIT_ERROR)
    show_verdicts(verdicts, title=f"Ledger check: {ledger}")
    _finish([v.name for v in verdicts if not v.passed], "Ledger is consistent")


@app.command()
def sweep(
    scenario: Path = ScenarioOption,
    eps: str = typer.Option("0.4,0.2,0.1,0.05", "--eps", help="Comma-separated epsilon list"),
    out: Path = OutOption,
    workers: int = WorkersOption,
    tolerance: Optional[List[str]] = ToleranceOption,
    log_level: str = LogLevelOption,
):
    """Run a scenario over several epsilons and report the uniform bounds."""
    configure_logging(log_level)
    epsilons = _parse_eps(eps)
    try:
        spec = _load(scenario, tolerance)
        show_banner("sweep", spec.name, spec.scenario_hash())
        report, manifest = execute_sweep(spec, epsilons, out, workers, load_scenario_snapshots(spec, scenario.parent))
    except KineticError as e:
        show_error_message(str(e))
        raise typer.Exit(EXIT_ERROR)
    show_sweep(report.rows, report.bounds)
    _finish(manifest.failures, "Bounds are uniform in epsilon")


@app.command()
def prep(
    scenario: Path = ScenarioOption,
    eps: str = typer.Option("0.5,0.25,0.1", "--eps", help="Decreasing epsilon list for the convergence report"),
    out: Path = OutOption,
    log_level: str = LogLevelOption,
):
    """Write the truncated initial datum and the truncation convergence report."""
    configure_logging(log_level)
    epsilons = _parse_eps(eps)
    try:
        spec = parse_scenario(scenario)
        show_banner("prep", spec.name, spec.scenario_hash())
        summary, manifest = execute_prep(spec, epsilons, out, load_scenario_snapshots(spec, scenario.parent))
    except (KineticError, ValueError) as e:
        show_error_message(str(e))
        raise typer.Exit(EXIT_ERROR)
    show_convergence(summary)
    show_outputs(manifest.outputs)
    _finish(manifest.failures, "Truncation gaps decrease")


def run_command(argv: Optional[List[str]] = None) -> int:
    """Invoke the application on an argument list and return its exit status."""
    try:
        status = app(args=argv, prog_name="kfp", standalone_mode=False)
    except typer.Exit as e:
        return e.exit_code
    except SystemExit as e:
        return int(e.code or 0)
    except Exception as e:
        # usage errors
        if hasattr(e, "show") and hasattr(e, "exit_code"):
            e.show()
            return e.exit_code
        raise
    return status if isinstance(status, int) else 0


if __name__ == "__main__":
    sys.exit(run_command())
