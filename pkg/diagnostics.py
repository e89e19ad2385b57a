"""
Kinetic Fokker-Planck Harness - Diagnostics Module

Balance ledger and audits: mass, energy and entropy budgets with boundary
fluxes, entropy dissipation, weighted Fisher information, the third moment,
the variance and Jensen identities, and the mollification chain
  int |f - f * eta_delta| <= delta int |grad_v f| <= 2 delta sqrt(int f) sqrt(int |grad_v sqrt f|^2).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.integrate import trapezoid

from collision import (
    LOG_FLOOR,
    CollisionCoefficients,
    CollisionFrequencyModel,
    CollisionStepReport,
    collision_dissipation,
    eval_collision_frequency,
)
from moments import MacroFields, RegularizedFields, div_renorm_v, variance_direct
from phase_grid import PhaseGrid, integrate_phase, velocity_integral
from transport_bc import TraceIncrement

logger = logging.getLogger(__name__)

CSV_VERSION = 3

LEDGER_COLUMNS = (
    "t", "mass", "energy", "entropy", "D_cum", "fisher_cum", "m3",
    "influx_mass", "outflux_mass", "influx_energy", "outflux_energy",
    "influx_entropy", "outflux_entropy", "energy_slack", "entropy_slack",
    "picard_iters", "min_f",
    # appended in schema version 2
    "work_energy", "source_entropy",
    # appended in schema version 3
    "work_scale",
)

# Cumulative columns with nonnegative integrands
MONOTONE_COLUMNS = (
    "D_cum", "fisher_cum", "influx_mass", "outflux_mass", "influx_energy", "outflux_energy", "work_scale",
)

AUDIT_NAMES = (
    "mass_ledger",
    "energy_inequality",
    "entropy_inequality",
    "dissipation_nonnegative",
    "nonnegativity",
    "reflection_flux_identity",
    "jensen_bound",
    "variance_identity",
    "mollification_chain",
    "picard_convergence",
    "monotone_cumulatives",
)


@dataclass
class Verdict:
    name: str
    passed: bool
    slack: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "passed": bool(self.passed), "slack": float(self.slack),
                "tolerance": float(self.tolerance), "detail": self.detail}


# =============================================================================
# INTEGRALS
# =============================================================================


def entropy_density(f: np.ndarray) -> np.ndarray:
    """f log f; entries at or below the positivity floor count as 0."""
    positive = f > LOG_FLOOR
    return np.where(positive, f * np.log(np.where(positive, f, 1.0)), 0.0)


def total_mass(f: np.ndarray, grid: PhaseGrid) -> float:
    return integrate_phase(f, grid)


def total_energy(f: np.ndarray, grid: PhaseGrid) -> float:
    """integral of (1 + |v|^2) f."""
    return integrate_phase(f, grid, 1.0 + grid.velocity_norm2())


def total_entropy(f: np.ndarray, grid: PhaseGrid) -> float:
    return integrate_phase(entropy_density(grid.check_field(f)), grid)


def third_moment(f: np.ndarray, grid: PhaseGrid) -> float:
    return integrate_phase(f, grid, grid.velocity_norm() ** 3)


def third_moment_series(history: Sequence[Tuple[float, np.ndarray]], grid: PhaseGrid) -> Tuple[np.ndarray, np.ndarray, float]:
    """Third moment per snapshot and its trapezoidal time integral.

    Args:
        history: (t, f) snapshots in time order

    Returns:
        (times, values, integral)
    """
    if not history:
        raise ValueError("third moment series needs at least one snapshot")
    times = np.array([t for t, _ in history], dtype=float)
    values = np.array([third_moment(f, grid) for _, f in history])
    integral = float(trapezoid(values, times)) if len(history) > 1 else 0.0
    return times, values, integral


def _gradients(values: np.ndarray, grid: PhaseGrid) -> List[np.ndarray]:
    """Central differences along each velocity axis, one-sided at the cutoff."""
    return [np.gradient(values, grid.dv[a], axis=grid.dim + a) for a in range(grid.dim)]


def fisher_density(f: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """Per-cell integral of |grad_v sqrt f|^2, differencing sqrt f directly."""
    root = np.sqrt(np.maximum(grid.check_field(f), 0.0))
    return velocity_integral(sum(g * g for g in _gradients(root, grid)), grid)


def weighted_fisher(f: np.ndarray, grid: PhaseGrid, weight: Optional[np.ndarray] = None) -> float:
    """integral of a(x) |grad_v sqrt f|^2 with a = (nu + eps) T^eps per spatial cell (1 if omitted)."""
    density = fisher_density(f, grid)
    if weight is not None:
        density = density * np.asarray(weight, dtype=float)
    return float(np.sum(density)) * grid.dx_volume


def fisher_weight(macro: MacroFields, reg: RegularizedFields, model: CollisionFrequencyModel) -> np.ndarray:
    """(nu + eps) T^eps from moments and the collision model."""
    nu = eval_collision_frequency(model, macro.rho, macro.j, macro.V)
    return (nu + reg.epsilon) * reg.T_eps


@dataclass
class DissipationValue:
    value: float
    skipped: int


def dissipation_functional(
    f: np.ndarray,
    grid: PhaseGrid,
    macro: MacroFields,
    model: CollisionFrequencyModel,
    reg: Optional[RegularizedFields] = None,
) -> DissipationValue:
    """integral of nu / (f T) |T grad_v f + (v - u) f|^2 in the face form the collision step uses.

    Without `reg` the coefficients are nu, T and u of `macro` with the raw
    velocity; with `reg` they are nu + eps, T^eps, u^eps and the renormalized
    velocity. Each face term is (e^x - e^y)(x - y) times a positive factor, so
    the value is nonnegative without clamping. Vacuum and zero-temperature
    cells contribute nothing; their velocity cells, and cells with f at the
    floor, are counted as skipped.
    """
    f = grid.check_field(f)
    nu = np.asarray(eval_collision_frequency(model, macro.rho, macro.j, macro.V), dtype=float)
    unregularized = reg is None
    if reg is None:
        reg = RegularizedFields(T_eps=macro.T, u_eps=macro.u, epsilon=0.0)
    else:
        nu = nu + reg.epsilon
    T = np.broadcast_to(reg.T_eps, grid.spatial_shape)
    live = ~macro.vacuum & (T > 0)
    coeffs = CollisionCoefficients(
        rate=np.where(live, np.broadcast_to(nu, grid.spatial_shape), 0.0),
        T=np.where(live, T, 1.0),
        u=np.asarray(reg.u_eps, dtype=float),
        epsilon=reg.epsilon,
        unregularized_drift=unregularized,
    )
    per_cell = collision_dissipation(f, grid, coeffs)
    cells = grid.spatial_shape + (1,) * grid.dim
    floor = (f <= LOG_FLOOR) & live.reshape(cells)
    n_velocity = int(np.prod(grid.velocity_shape))
    skipped = int(np.sum(~live)) * n_velocity + int(np.sum(floor))
    return DissipationValue(value=float(np.sum(per_cell)) * grid.dx_volume, skipped=skipped)


def renorm_source(f: np.ndarray, grid: PhaseGrid, rate: np.ndarray, epsilon: float) -> float:
    """integral of (nu + eps) f div_v [[v]]."""
    _, vs = grid.phase_coordinates()
    v = np.stack(np.broadcast_arrays(*vs), axis=-1)
    div = div_renorm_v(v, epsilon)
    cells = grid.spatial_shape + (1,) * grid.dim
    return integrate_phase(f, grid, np.asarray(rate).reshape(cells) * div)


# =============================================================================
# POINTWISE AUDITS
# =============================================================================


def jensen_check(macro: MacroFields) -> float:
    """Largest relative excess of rho |u|^2 over E2 (<= 0 up to round-off)."""
    excess = macro.rho * np.sum(macro.u * macro.u, axis=-1) - macro.e2
    scale = np.maximum(macro.e2, 1e-300)
    rel = np.where(macro.vacuum, 0.0, excess / scale)
    return float(np.max(rel)) if rel.size else 0.0


def variance_identity_check(macro: MacroFields, f: Optional[np.ndarray] = None,
                            grid: Optional[PhaseGrid] = None) -> float:
    """Largest relative deviation between V and a second evaluation of the variance.

    With f and grid the second evaluation is the direct integral of |v - u|^2 f / d;
    otherwise it is (E2 - |j|^2 / rho) / d. Vacuum cells contribute 0.
    """
    d = macro.dim
    if f is not None and grid is not None:
        other = variance_direct(f, macro, grid)
    else:
        safe = np.where(macro.vacuum, 1.0, macro.rho)
        other = np.maximum((macro.e2 - np.sum(macro.j * macro.j, axis=-1) / safe) / d, 0.0)
    scale = np.maximum(macro.e2 / d, 1e-300)
    dev = np.where(macro.vacuum, 0.0, np.abs(macro.V - other) / scale)
    return float(np.max(dev)) if dev.size else 0.0


def reflection_flux_defect(inc: TraceIncrement, theta: float) -> float:
    """Relative mismatch of incoming vs theta * outgoing fluxes of 1 and 1 + |v|^2."""
    totals = inc.totals()
    worst = 0.0
    for q_in, q_out in (("mass_in", "mass_out"), ("v2_in", "v2_out")):
        expected = theta * totals[q_out]
        worst = max(worst, abs(totals[q_in] - expected) / max(abs(expected), totals[q_out], 1e-300))
    return worst


# =============================================================================
# MOLLIFICATION PROBE
# =============================================================================


def mollifier(grid: PhaseGrid, delta: float) -> np.ndarray:
    """Quartic bump (1 - |w|^2)^2 on |w| < 1, w = dv offset / delta, normalized to discrete sum 1."""
    if delta < 2.0 * max(grid.dv) * (1.0 - 1e-12):
        raise ValueError(f"mollification width {delta} below resolvable width {2.0 * max(grid.dv)}")
    axes = []
    for dv in grid.dv:
        m = int(np.floor(delta / dv))
        axes.append(np.arange(-m, m + 1) * dv / delta)
    w = np.meshgrid(*axes, indexing="ij")
    r2 = sum(c * c for c in w)
    kernel = np.where(r2 < 1.0, (1.0 - r2) ** 2, 0.0)
    return kernel / np.sum(kernel)


@dataclass
class CompactnessProbe:
    delta: float
    lhs: np.ndarray
    mid: np.ndarray
    rhs: np.ndarray
    fisher: np.ndarray
    vacuum: np.ndarray
    tolerance: float

    @property
    def lhs_over_mid(self) -> float:
        return _worst_ratio(self.lhs, self.mid, self.vacuum)

    @property
    def mid_over_rhs(self) -> float:
        return _worst_ratio(self.mid, self.rhs, self.vacuum)

    @property
    def passed(self) -> bool:
        ok = (self.lhs <= self.mid * (1.0 + self.tolerance) + 1e-300) & (
            self.mid <= self.rhs * (1.0 + self.tolerance) + 1e-300)
        return bool(np.all(ok | self.vacuum))


def _worst_ratio(num: np.ndarray, den: np.ndarray, vacuum: np.ndarray) -> float:
    live = ~vacuum & (num > 0)
    if not np.any(live):
        return 0.0
    return float(np.max(num[live] / np.maximum(den[live], 1e-300)))


def mollification_probe(f: np.ndarray, grid: PhaseGrid, delta: float, rho_floor: float = 0.0,
                        tolerance: float = 0.05) -> CompactnessProbe:
    """Per-cell terms of the mollification chain at width delta.

    The convolution extends f by its edge values beyond the velocity cutoff.
    """
    f = grid.check_field(f)
    kernel = mollifier(grid, delta)
    kernel = kernel.reshape((1,) * grid.dim + kernel.shape)
    smoothed = ndimage.convolve(f, kernel, mode="nearest")
    lhs = velocity_integral(np.abs(f - smoothed), grid)
    grads = _gradients(f, grid)
    mid = delta * velocity_integral(np.sqrt(sum(g * g for g in grads)), grid)
    fisher = fisher_density(f, grid)
    rho = velocity_integral(f, grid)
    rhs = 2.0 * delta * np.sqrt(rho) * np.sqrt(fisher)
    return CompactnessProbe(delta=delta, lhs=lhs, mid=mid, rhs=rhs, fisher=fisher,
                            vacuum=rho <= rho_floor, tolerance=tolerance)


# =============================================================================
# BALANCE LEDGER
# =============================================================================


@dataclass
class BalanceLedger:
    """Cumulative budgets of a run and the per-row snapshot of all columns.

    Slacks:
      energy:  E(t) - E(0) + out_E - in_E, held against the collision work W
      entropy: H(t) - H(0) + out_H - in_H + D - S  (S: drift-work source)
    """

    grid: PhaseGrid
    mass0: float = 0.0
    energy0: float = 0.0
    entropy0: float = 0.0
    influx_mass: float = 0.0
    outflux_mass: float = 0.0
    influx_energy: float = 0.0
    outflux_energy: float = 0.0
    influx_entropy: float = 0.0
    outflux_entropy: float = 0.0
    D_cum: float = 0.0
    S_cum: float = 0.0
    work_cum: float = 0.0
    work_scale_cum: float = 0.0
    fisher_cum: float = 0.0
    m3_cum: float = 0.0
    renorm_source_cum: float = 0.0
    functional_cum: float = 0.0
    min_f: float = float("inf")
    max_f: float = 0.0
    min_cell_dissipation: float = 0.0
    max_mass_defect: float = 0.0
    max_mass_seen: float = 0.0
    max_reflection_defect: float = 0.0
    max_picard_change: float = 0.0
    picard_since_row: int = 0
    flagged_steps: int = 0
    steps: int = 0
    rows: List[Dict[str, float]] = field(default_factory=list)

    @classmethod
    def start(cls, f: np.ndarray, grid: PhaseGrid) -> "BalanceLedger":
        ledger = cls(grid=grid)
        ledger.mass0 = total_mass(f, grid)
        ledger.energy0 = total_energy(f, grid)
        ledger.entropy0 = total_entropy(f, grid)
        ledger.max_mass_seen = ledger.mass0
        ledger._see(f)
        return ledger

    def _see(self, f: np.ndarray) -> None:
        self.min_f = min(self.min_f, float(np.min(f)))
        self.max_f = max(self.max_f, float(np.max(f)))

    def record_transport(self, inc: TraceIncrement) -> None:
        totals = inc.totals()
        self.influx_mass += totals["mass_in"]
        self.outflux_mass += totals["mass_out"]
        self.influx_energy += totals["mass_in"] + totals["v2_in"]
        self.outflux_energy += totals["mass_out"] + totals["v2_out"]
        self.influx_entropy += totals["entropy_in"]
        self.outflux_entropy += totals["entropy_out"]

    def record_collision(self, report: CollisionStepReport, dt: float) -> None:
        vol = self.grid.dx_volume
        self.D_cum += dt * vol * report.dissipation_total
        self.S_cum += dt * vol * report.source_total
        self.work_cum += vol * float(np.sum(report.work))
        self.work_scale_cum += vol * float(np.sum(report.work_scale))
        if report.dissipation.size:
            self.min_cell_dissipation = min(self.min_cell_dissipation, float(np.min(report.dissipation)))

    def record_step(self, f_before: np.ndarray, f_after: np.ndarray, increments: Sequence[TraceIncrement],
                    dt: float, fisher: float, source: float, functional: float,
                    picard_iterations: int, picard_change: float, flagged: bool,
                    theta: Optional[float] = None) -> float:
        """Close one step's mass balance and accumulate time integrals.

        Returns:
            The step's mass defect relative to the initial (or largest seen) mass
        """
        grid = self.grid
        mass_before = total_mass(f_before, grid)
        mass_after = total_mass(f_after, grid)
        net = sum(inc.totals()["mass_in"] - inc.totals()["mass_out"] for inc in increments)
        self.max_mass_seen = max(self.max_mass_seen, mass_after)
        defect = abs(mass_after - mass_before - net) / max(self.mass0, self.max_mass_seen, 1e-300)
        self.max_mass_defect = max(self.max_mass_defect, defect)
        if theta is not None:
            for inc in increments:
                self.max_reflection_defect = max(self.max_reflection_defect, reflection_flux_defect(inc, theta))
        self.fisher_cum += dt * fisher
        self.renorm_source_cum += dt * source
        self.functional_cum += dt * functional
        self.m3_cum += dt * third_moment(f_after, grid)
        self.picard_since_row = max(self.picard_since_row, picard_iterations)
        self.max_picard_change = max(self.max_picard_change, picard_change)
        self.flagged_steps += int(flagged)
        self.steps += 1
        self._see(f_after)
        return defect

    def snapshot(self, t: float, f: np.ndarray) -> Dict[str, float]:
        """Append and return the ledger row at time t."""
        grid = self.grid
        mass = total_mass(f, grid)
        energy = total_energy(f, grid)
        entropy = total_entropy(f, grid)
        self._see(f)
        row = {
            "t": float(t),
            "mass": mass,
            "energy": energy,
            "entropy": entropy,
            "D_cum": self.D_cum,
            "fisher_cum": self.fisher_cum,
            "m3": third_moment(f, grid),
            "influx_mass": self.influx_mass,
            "outflux_mass": self.outflux_mass,
            "influx_energy": self.influx_energy,
            "outflux_energy": self.outflux_energy,
            "influx_entropy": self.influx_entropy,
            "outflux_entropy": self.outflux_entropy,
            "energy_slack": energy_slack(energy, self.energy0, self.outflux_energy, self.influx_energy),
            "entropy_slack": entropy_slack(entropy, self.entropy0, self.outflux_entropy, self.influx_entropy,
                                           self.D_cum, self.S_cum),
            "picard_iters": float(self.picard_since_row),
            "min_f": self.min_f,
            "work_energy": self.work_cum,
            "source_entropy": self.S_cum,
            "work_scale": self.work_scale_cum,
        }
        self.picard_since_row = 0
        self.rows.append(row)
        return row

    def fisher_identity_residual(self) -> float:
        """H(t) - H(0) + out_H - in_H + 4 F_w - integral of (nu + eps) f div [[v]] at the last row."""
        if not self.rows:
            return 0.0
        last = self.rows[-1]
        return (last["entropy"] - self.entropy0 + self.outflux_entropy - self.influx_entropy
                + 4.0 * self.fisher_cum - self.renorm_source_cum)


def energy_slack(energy: float, energy0: float, outflux: float, influx: float) -> float:
    return energy - energy0 + outflux - influx


def entropy_slack(entropy: float, entropy0: float, outflux: float, influx: float, D: float, S: float) -> float:
    return entropy - entropy0 + outflux - influx + D - S


def entropy_and_energy(f: np.ndarray, t: float, ledger: BalanceLedger,
                       trace_increments: Sequence[TraceIncrement] = ()) -> BalanceLedger:
    """Fold pending trace increments into the ledger and append the row at time t."""
    for inc in trace_increments:
        ledger.record_transport(inc)
    ledger.snapshot(t, f)
    return ledger


def monotone_violation(rows: Sequence[Dict[str, float]], columns: Sequence[str] = MONOTONE_COLUMNS) -> float:
    """Largest decrease of any cumulative column between consecutive rows."""
    worst = 0.0
    for prev, cur in zip(rows, rows[1:]):
        for col in columns:
            worst = max(worst, prev[col] - cur[col])
    return worst


@dataclass
class AuditInputs:
    """Pointwise audit results gathered over the run's snapshots."""

    jensen: float = 0.0
    variance: float = 0.0
    mollify_lhs_mid: float = 0.0
    mollify_mid_rhs: float = 0.0
    mollify_passed: bool = True
    mollify_evaluated: bool = False
    functional_min: float = 0.0


def evaluate_verdicts(ledger: BalanceLedger, audits: AuditInputs, tolerances: Any,
                      reflection: bool = False) -> List[Verdict]:
    """One verdict per entry of AUDIT_NAMES, in that order.

    `tolerances` needs the attributes mass, energy, entropy, positivity,
    reflection, jensen, variance, mollification and work.
    """
    rows = ledger.rows
    energy_scale = max(ledger.energy0, max((r["energy"] for r in rows), default=0.0), 1e-300)
    energy_residual = max((abs(r["energy_slack"] - r["work_energy"]) for r in rows), default=0.0)
    energy_tol = tolerances.energy * energy_scale + tolerances.work * max(
        (r["work_scale"] for r in rows), default=0.0)
    max_entropy_slack = max((r["entropy_slack"] for r in rows), default=0.0)
    entropy_tol = tolerances.entropy * abs(ledger.entropy0) + tolerances.entropy
    positivity_tol = tolerances.positivity * ledger.max_f
    min_f = ledger.min_f if np.isfinite(ledger.min_f) else 0.0
    dissipation_floor = min(ledger.min_cell_dissipation, audits.functional_min)
    mollify_ratio = max(audits.mollify_lhs_mid, audits.mollify_mid_rhs)

    verdicts = [
        Verdict("mass_ledger", ledger.max_mass_defect <= tolerances.mass, ledger.max_mass_defect,
                tolerances.mass, "max per-step |dM - in + out| / M0"),
        Verdict("energy_inequality", energy_residual <= energy_tol, energy_residual, energy_tol,
                "|E(t) - E0 + out - in - analytic collision work|"),
        Verdict("entropy_inequality", max_entropy_slack <= entropy_tol, max_entropy_slack, entropy_tol,
                "H(t) - H0 + out - in + D - S"),
        Verdict("dissipation_nonnegative", dissipation_floor >= 0.0, -dissipation_floor, 0.0,
                "min cell dissipation"),
        Verdict("nonnegativity", min_f >= -positivity_tol, -min_f, positivity_tol, "min f over all steps"),
        Verdict("reflection_flux_identity",
                (not reflection) or ledger.max_reflection_defect <= tolerances.reflection,
                ledger.max_reflection_defect, tolerances.reflection,
                "in = theta * out for 1 and 1 + |v|^2" if reflection else "not applicable"),
        Verdict("jensen_bound", audits.jensen <= tolerances.jensen, audits.jensen, tolerances.jensen,
                "max (rho |u|^2 - E2) / E2"),
        Verdict("variance_identity", audits.variance <= tolerances.variance, audits.variance,
                tolerances.variance, "max |V - direct variance| / (E2 / d)"),
        Verdict("mollification_chain", audits.mollify_passed, mollify_ratio - 1.0, tolerances.mollification,
                "worst lhs/mid and mid/rhs" if audits.mollify_evaluated else "no widths configured"),
        Verdict("picard_convergence", ledger.flagged_steps == 0, float(ledger.flagged_steps), 0.0,
                f"max coefficient change {ledger.max_picard_change:.3e}"),
        Verdict("monotone_cumulatives", monotone_violation(rows) <= 0.0, monotone_violation(rows), 0.0,
                "cumulative columns nondecreasing"),
    ]
    assert tuple(v.name for v in verdicts) == AUDIT_NAMES
    return verdicts
