"""
Kinetic Fokker-Planck Harness - UI Module

Handles all console output of the command line using Rich.
"""

from typing import Any, Dict, List, Sequence

from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from diagnostics import Verdict

# Initialize global console
console = Console()

ICON_PASS = "✓"
ICON_FAIL = "✗"


def _number(value: Any) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def show_banner(command: str, scenario_name: str, scenario_hash: str) -> None:
    """Display the header panel of a command."""
    console.print(
        Panel.fit(
            f"[bold cyan]{command.upper()}[/bold cyan]  [bold]{scenario_name}[/bold]\n[dim]scenario {scenario_hash}[/dim]",
            border_style="blue",
            padding=(0, 2),
        )
    )


def show_verdicts(verdicts: Sequence[Verdict], title: str = "Audit Verdicts") -> None:
    """Display one row per audited inequality."""
    table = Table(title=title, box=box.SIMPLE_HEAVY)
    table.add_column("Audit", style="bold")
    table.add_column("Result", justify="center")
    table.add_column("Slack", justify="right")
    table.add_column("Tolerance", justify="right")
    table.add_column("Detail", style="dim")
    for v in verdicts:
        result = f"[green]{ICON_PASS} pass[/green]" if v.passed else f"[red]{ICON_FAIL} FAIL[/red]"
        table.add_row(v.name, result, f"{v.slack:.3e}", f"{v.tolerance:.3e}", v.detail)
    console.print(table)


def show_measurements(measurements: Dict[str, Any], title: str = "Measurements") -> None:
    table = Table(title=title, show_header=False, box=box.SIMPLE)
    for key, value in measurements.items():
        table.add_row(key, _number(value))
    console.print(table)


def show_sweep(rows: List[Dict[str, Any]], bounds: Dict[str, Any]) -> None:
    """Display the per-epsilon summary and the max-over-epsilon bounds line."""
    table = Table(title="Epsilon Sweep", box=box.SIMPLE_HEAVY)
    table.add_column("eps", justify="right")
    table.add_column("int m3 dt", justify="right")
    table.add_column("int Fisher dt", justify="right")
    table.add_column("Audits")
    for row in rows:
        audits = f"[green]{ICON_PASS}[/green]" if row["passed"] else f"[red]{', '.join(row['failures'])}[/red]"
        table.add_row(f"{row['epsilon']:g}", f"{row['m3_integral']:.6g}", f"{row['fisher_integral']:.6g}", audits)
    table.add_section()
    table.add_row("max", f"{bounds['m3_max']:.6g}", f"{bounds['fisher_max']:.6g}",
                  f"ratios {bounds['m3_ratio']:.3f} / {bounds['fisher_ratio']:.3f}")
    console.print(table)
    for name in ("m3", "fisher"):
        if bounds.get(f"{name}_blow_up"):
            console.print(f"[yellow]{name} grows without slowing as eps decreases[/yellow]")
    color = "green" if bounds["uniform"] else "red"
    verdict = "uniform in eps" if bounds["uniform"] else "NOT uniform in eps"
    console.print(f"[bold {color}]Bounds {verdict}[/bold {color}]")


def show_convergence(summary: Dict[str, Dict[str, Any]]) -> None:
    """Display the truncation gaps per datum."""
    for name, report in summary.items():
        table = Table(title=f"Truncation: {name}", box=box.SIMPLE)
        for col in ("eps", "L1 gap", "energy gap", "entropy gap", "cap active"):
            table.add_column(col, justify="right")
        for row in report["rows"]:
            table.add_row(f"{row['epsilon']:g}", f"{row['l1_gap']:.3e}", f"{row['energy_gap']:.3e}",
                          f"{row['entropy_gap']:.3e}", f"{row['cap_active_fraction']:.3f}")
        console.print(table)
        if not report["monotone"]:
            console.print("[yellow]gaps do not decrease monotonically[/yellow]")


def show_outputs(outputs: Dict[str, str]) -> None:
    for key, path in outputs.items():
        console.print(f"  [dim]{key}:[/dim] {path}")


def show_error_message(message: str) -> None:
    """Display an error message."""
    console.print(f"[bold red]{ICON_FAIL} Error: {message}[/bold red]")


def show_success_message(message: str) -> None:
    """Display a success message."""
    console.print(f"[bold green]{ICON_PASS} {message}[/bold green]")


def show_failure_summary(failures: Sequence[str]) -> None:
    console.print(f"[bold red]{ICON_FAIL} {len(failures)} audit(s) failed: {', '.join(failures)}[/bold red]")
