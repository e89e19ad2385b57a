"""
Kinetic Fokker-Planck Harness - Integrator Module

Scenario description, the split time step (transport / collision with a
Picard loop on the moment coefficients), the run loop with its ledger and
verdicts, and the epsilon sweep.
"""

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from collision import (
    CLOSURES,
    COLLISION_MODELS,
    CollisionCoefficients,
    CollisionFrequencyModel,
    CollisionStepReport,
    build_collision_model,
    collision_coefficients,
    collision_step,
)
from data_prep import PRESETS, DatumSpec, build_datum, truncate_boundary, truncate_initial, validate_datum
from diagnostics import (
    AuditInputs,
    BalanceLedger,
    Verdict,
    dissipation_functional,
    entropy_and_energy,
    evaluate_verdicts,
    jensen_check,
    mollification_probe,
    renorm_source,
    variance_identity_check,
    weighted_fisher,
)
from errors import GridError, KineticError, ScenarioError, SolverError
from moments import MacroFields, RegularizedFields, check_nonnegative, compute_moments, default_rho_floor, regularize_fields
from phase_grid import BoundaryFace, GridSpec, PhaseGrid, build_grid, classify_boundary, truncation_fraction
from transport_bc import (
    BoundaryCondition,
    BoundaryKind,
    InflowDatum,
    TraceIncrement,
    TraceRecord,
    make_inflow,
    transport_step,
)

logger = logging.getLogger(__name__)

INFLOW_PRESETS = ("zero", "maxwellian", "tabulated", "initial_trace")


# =============================================================================
# SCENARIO
# =============================================================================


@dataclass
class BoundarySpec:
    kind: str = "inflow"
    theta: float = 0.0
    inflow: str = "zero"
    inflow_params: Dict[str, Any] = field(default_factory=dict)
    inflow_file: Optional[str] = None


@dataclass
class CollisionSpec:
    model: str = "constant"
    params: Dict[str, Any] = field(default_factory=dict)
    closure: str = "nonlinear"
    unregularized_drift: bool = False


@dataclass
class TimeSpec:
    horizon: float = 1.0
    cfl_fraction: float = 0.5
    dt: Optional[float] = None
    order: int = 1
    splitting: str = "strang"
    muscl: bool = False


@dataclass
class PicardSpec:
    max_iterations: int = 25
    tolerance: float = 1e-8


@dataclass
class Tolerances:
    rho_floor: Optional[float] = None
    mass: float = 1e-12
    energy: float = 1e-8
    entropy: float = 1e-6
    positivity: float = 1e-14
    reflection: float = 1e-12
    jensen: float = 1e-12
    variance: float = 1e-10
    mollification: float = 0.05
    work: float = 0.05


@dataclass
class OutputSpec:
    cadence: int = 1
    mollify_widths: List[float] = field(default_factory=lambda: [4.0, 8.0])
    keep_traces: bool = False
    snapshot: bool = False


@dataclass
class DataSpec:
    truncate: bool = True


@dataclass
class Scenario:
    """Full description of one simulation. Mollification widths are multiples of dv."""

    name: str = "scenario"
    epsilon: float = 0.1
    grid: GridSpec = field(default_factory=GridSpec)
    boundary: BoundarySpec = field(default_factory=BoundarySpec)
    collision: CollisionSpec = field(default_factory=CollisionSpec)
    initial: DatumSpec = field(default_factory=DatumSpec)
    time: TimeSpec = field(default_factory=TimeSpec)
    picard: PicardSpec = field(default_factory=PicardSpec)
    tolerances: Tolerances = field(default_factory=Tolerances)
    output: OutputSpec = field(default_factory=OutputSpec)
    data: DataSpec = field(default_factory=DataSpec)

    def validate(self) -> "Scenario":
        """Check cross-field constraints, raising ScenarioError with the key path."""
        try:
            build_grid(self.grid)
        except GridError as e:
            raise ScenarioError(str(e), "grid") from e
        if not 0.0 < self.epsilon <= 1.0:
            raise ScenarioError(f"must lie in (0, 1], got {self.epsilon}", "epsilon")
        if not self.time.horizon >= 0.0:
            raise ScenarioError(f"must be nonnegative, got {self.time.horizon}", "time.horizon")
        if not 0.0 < self.time.cfl_fraction <= 1.0:
            raise ScenarioError(f"must lie in (0, 1], got {self.time.cfl_fraction}", "time.cfl_fraction")
        if self.time.dt is not None and not self.time.dt > 0:
            raise ScenarioError(f"must be positive, got {self.time.dt}", "time.dt")
        if self.time.order not in (1, 2):
            raise ScenarioError(f"must be 1 or 2, got {self.time.order}", "time.order")
        if self.time.splitting not in ("strang", "lie"):
            raise ScenarioError(f"must be 'strang' or 'lie', got '{self.time.splitting}'", "time.splitting")
        if self.picard.max_iterations < 1:
            raise ScenarioError(f"must be at least 1, got {self.picard.max_iterations}", "picard.max_iterations")
        if not self.picard.tolerance > 0:
            raise ScenarioError(f"must be positive, got {self.picard.tolerance}", "picard.tolerance")
        if self.output.cadence < 1:
            raise ScenarioError(f"must be at least 1, got {self.output.cadence}", "output.cadence")
        if any(w < 2.0 for w in self.output.mollify_widths):
            raise ScenarioError("widths must be at least 2 (in units of dv)", "output.mollify_widths")
        kinds = [k.value for k in BoundaryKind]
        if self.boundary.kind not in kinds:
            raise ScenarioError(f"must be one of {kinds}, got '{self.boundary.kind}'", "boundary.kind")
        if self.boundary.kind == BoundaryKind.REFLECTION.value and not 0.0 <= self.boundary.theta < 1.0:
            raise ScenarioError(f"theta must lie in [0, 1), got {self.boundary.theta}", "boundary.theta")
        if self.boundary.inflow not in INFLOW_PRESETS:
            raise ScenarioError(f"must be one of {list(INFLOW_PRESETS)}, got '{self.boundary.inflow}'",
                                "boundary.inflow")
        if self.collision.model not in COLLISION_MODELS:
            raise ScenarioError(f"unknown model '{self.collision.model}'", "collision.model")
        if self.collision.closure not in CLOSURES:
            raise ScenarioError(f"must be one of {list(CLOSURES)}, got '{self.collision.closure}'",
                                "collision.closure")
        if self.initial.kind not in PRESETS:
            raise ScenarioError(f"unknown preset '{self.initial.kind}'", "initial.preset")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["grid"] = self.grid.to_dict()
        data["initial"] = {"preset": self.initial.kind, "params": dict(self.initial.params),
                           "file": self.initial.path}
        return data

    def scenario_hash(self) -> str:
        """MD5 of the canonical JSON form."""
        content = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.md5(content.encode()).hexdigest()


# =============================================================================
# STATE AND CONTEXT
# =============================================================================


@dataclass
class SimulationState:
    f: np.ndarray
    t: float = 0.0
    step: int = 0


@dataclass
class SimulationContext:
    """Everything derived from a scenario that stays fixed during a run."""

    scenario: Scenario
    grid: PhaseGrid
    faces: List[BoundaryFace]
    bc: BoundaryCondition
    model: CollisionFrequencyModel
    rho_floor: float
    workers: int = 1


@dataclass
class StepReport:
    t: float
    dt: float
    picard_iterations: int
    coefficient_changes: List[float]
    flagged: bool
    collision: CollisionStepReport
    traces: List[TraceIncrement]
    coefficients: CollisionCoefficients
    min_f: float


@dataclass
class SimulationOutput:
    final_state: SimulationState
    rows: List[Dict[str, float]]
    trace: TraceRecord
    ledger: BalanceLedger
    verdicts: List[Verdict]
    measurements: Dict[str, float]
    step_reports: List[Dict[str, Any]]

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def failures(self) -> List[str]:
        return [v.name for v in self.verdicts if not v.passed]


def stable_dt(grid: PhaseGrid, cfl_fraction: float) -> float:
    """fraction / sum_a (Vmax / dx_a); fraction * dx / Vmax in one dimension."""
    if not 0.0 < cfl_fraction <= 1.0:
        raise ValueError(f"CFL fraction must lie in (0, 1], got {cfl_fraction}")
    return cfl_fraction / sum(grid.vmax / h for h in grid.dx)


def time_steps(scenario: Scenario, grid: PhaseGrid) -> Tuple[int, float]:
    """Number of steps and the uniform dt reaching the horizon exactly."""
    horizon = scenario.time.horizon
    target = scenario.time.dt if scenario.time.dt is not None else stable_dt(grid, scenario.time.cfl_fraction)
    limit = stable_dt(grid, 1.0)
    if target > limit * (1.0 + 1e-12):
        raise ScenarioError(f"dt {target} exceeds the transport bound {limit}", "time.dt")
    if horizon == 0.0:
        return 0, target
    n = max(1, int(math.ceil(horizon / target - 1e-9)))
    return n, horizon / n


def build_initial_state(scenario: Scenario, grid: PhaseGrid, model: CollisionFrequencyModel,
                        snapshot: Optional[np.ndarray] = None) -> np.ndarray:
    """Sample the initial preset and apply the truncation when enabled."""
    f0 = build_datum(scenario.initial, grid, epsilon=scenario.epsilon, model=model,
                     closure=scenario.collision.closure,
                     unregularized_drift=scenario.collision.unregularized_drift, snapshot=snapshot)
    if scenario.data.truncate:
        f0 = truncate_initial(f0, grid, scenario.epsilon)
        validate_datum(f0, grid)
    return f0


def build_boundary(scenario: Scenario, grid: PhaseGrid, f0: np.ndarray,
                   inflow_snapshot: Optional[np.ndarray] = None) -> BoundaryCondition:
    spec = scenario.boundary
    if spec.kind != BoundaryKind.INFLOW.value:
        return BoundaryCondition(kind=spec.kind, theta=spec.theta)
    if spec.inflow == "initial_trace":
        datum = make_inflow("tabulated", grid, snapshot=f0)
    else:
        datum = make_inflow(spec.inflow, grid, spec.inflow_params, snapshot=inflow_snapshot)
    if scenario.data.truncate and spec.inflow != "initial_trace":
        datum = InflowDatum(kind=datum.kind, params=datum.params,
                            tables={k: truncate_boundary(v, grid, scenario.epsilon) for k, v in datum.tables.items()})
    return BoundaryCondition(kind=spec.kind, inflow=datum)


def prepare(scenario: Scenario, workers: int = 1, initial: Optional[np.ndarray] = None,
            snapshots: Optional[Dict[str, np.ndarray]] = None) -> Tuple[SimulationContext, np.ndarray]:
    """Validate a scenario and build the grid, boundary data, model and initial state.

    Args:
        scenario: Scenario to run
        workers: Worker threads for the collision solves
        initial: Overrides the initial preset when given
        snapshots: Arrays for tabulated data, keyed "initial" and "inflow"
    """
    scenario.validate()
    snapshots = snapshots or {}
    grid = build_grid(scenario.grid)
    model = build_collision_model(scenario.collision.model, scenario.collision.params)
    if initial is None:
        f0 = build_initial_state(scenario, grid, model, snapshots.get("initial"))
    else:
        f0 = grid.check_field(initial).copy()
        validate_datum(f0, grid)
    bc = build_boundary(scenario, grid, f0, snapshots.get("inflow"))
    rho_floor = scenario.tolerances.rho_floor
    if rho_floor is None:
        rho_floor = default_rho_floor(f0, grid)
    vacuum = int(np.count_nonzero(compute_moments(f0, grid, rho_floor).vacuum))
    if 0 < vacuum < int(np.prod(grid.spatial_shape)):
        logger.warning("%d spatial cells start below rho_floor=%.3e; their u and T are set by convention",
                       vacuum, rho_floor)
    ctx = SimulationContext(scenario=scenario, grid=grid, faces=classify_boundary(grid), bc=bc, model=model,
                            rho_floor=rho_floor, workers=workers)
    return ctx, f0


# =============================================================================
# TIME STEP
# =============================================================================


def coefficients_for(f: np.ndarray, ctx: SimulationContext) -> Tuple[MacroFields, RegularizedFields, CollisionCoefficients]:
    macro = compute_moments(f, ctx.grid, ctx.rho_floor)
    reg = regularize_fields(macro, ctx.scenario.epsilon)
    coeffs = collision_coefficients(macro, reg, ctx.model, ctx.scenario.collision.closure,
                                    ctx.scenario.collision.unregularized_drift)
    return macro, reg, coeffs


def collision_substep(f: np.ndarray, ctx: SimulationContext, dt: float):
    """Collision over dt with Picard iteration on (nu, T^eps, u^eps).

    Each pass solves with the current coefficients, then re-evaluates them from
    the result (order 1) or from the midpoint state (order 2). The loop stops
    when the relative change is within tolerance; at the iteration cap the last
    iterate is accepted and the step flagged. One iteration is the frozen
    coefficient step.

    Returns:
        (f_new, report, coefficients used, iterations, change history, flagged)
    """
    picard = ctx.scenario.picard
    crank_nicolson = ctx.scenario.time.order == 2
    _, _, coeffs = coefficients_for(f, ctx)
    changes: List[float] = []
    converged = picard.max_iterations == 1
    iterations = 0
    while True:
        iterations += 1
        f_new, report = collision_step(f, ctx.grid, coeffs, dt, ctx.workers, crank_nicolson)
        if picard.max_iterations == 1:
            break
        target = 0.5 * (f + f_new) if crank_nicolson else f_new
        _, _, updated = coefficients_for(target, ctx)
        change = updated.change_from(coeffs)
        changes.append(change)
        logger.debug("picard iteration %d: coefficient change %.3e", iterations, change)
        if change <= picard.tolerance:
            converged = True
            break
        if iterations >= picard.max_iterations:
            break
        coeffs = updated
    return f_new, report, coeffs, iterations, changes, not converged


def step(state: SimulationState, ctx: SimulationContext, dt: float) -> Tuple[SimulationState, StepReport]:
    """One split step: transport(dt/2), collision(dt), transport(dt/2) (Strang) or
    transport(dt), collision(dt) (Lie)."""
    spec = ctx.scenario.time
    kwargs = dict(grid=ctx.grid, faces=ctx.faces, muscl=spec.muscl, order=spec.order,
                  keep_values=ctx.scenario.output.keep_traces)
    t = state.t
    traces = []
    if spec.splitting == "strang":
        f, inc = transport_step(state.f, ctx.bc, t, 0.5 * dt, **kwargs)
        traces.append(inc)
        f, report, coeffs, iterations, changes, flagged = collision_substep(f, ctx, dt)
        f, inc = transport_step(f, ctx.bc, t + 0.5 * dt, 0.5 * dt, **kwargs)
        traces.append(inc)
    else:
        f, inc = transport_step(state.f, ctx.bc, t, dt, **kwargs)
        traces.append(inc)
        f, report, coeffs, iterations, changes, flagged = collision_substep(f, ctx, dt)
    check_nonnegative(f, "state after step")
    if flagged:
        logger.warning("picard iteration did not converge at t=%.6g after %d iterations (last change %.3e)",
                       t, iterations, changes[-1] if changes else float("nan"))
    new_state = SimulationState(f=f, t=t + dt, step=state.step + 1)
    report_out = StepReport(t=t, dt=dt, picard_iterations=iterations, coefficient_changes=changes,
                            flagged=flagged, collision=report, traces=traces, coefficients=coeffs,
                            min_f=float(np.min(f)))
    return new_state, report_out


# =============================================================================
# RUN
# =============================================================================


def _audit_snapshot(f: np.ndarray, ctx: SimulationContext, audits: AuditInputs) -> None:
    """Pointwise audits on one output snapshot."""
    grid = ctx.grid
    macro = compute_moments(f, grid, ctx.rho_floor)
    audits.jensen = max(audits.jensen, jensen_check(macro))
    audits.variance = max(audits.variance, variance_identity_check(macro, f, grid))
    tol = ctx.scenario.tolerances.mollification
    for width in ctx.scenario.output.mollify_widths:
        probe = mollification_probe(f, grid, width * max(grid.dv), ctx.rho_floor, tol)
        audits.mollify_evaluated = True
        audits.mollify_lhs_mid = max(audits.mollify_lhs_mid, probe.lhs_over_mid)
        audits.mollify_mid_rhs = max(audits.mollify_mid_rhs, probe.mid_over_rhs)
        audits.mollify_passed = audits.mollify_passed and probe.passed


def run(scenario: Scenario, workers: int = 1, sink: Optional[Callable[[Dict[str, float]], None]] = None,
        initial: Optional[np.ndarray] = None, snapshots: Optional[Dict[str, np.ndarray]] = None) -> SimulationOutput:
    """Advance a scenario to its horizon, emitting ledger rows at the output cadence.

    Raises:
        SolverError: First fatal substep failure, stamped with its time
    """
    ctx, f0 = prepare(scenario, workers, initial, snapshots)
    grid = ctx.grid
    n_steps, dt = time_steps(scenario, grid)
    logger.info("running '%s' (hash %s): %d steps of dt=%.6g, eps=%g", scenario.name,
                scenario.scenario_hash(), n_steps, dt, scenario.epsilon)

    state = SimulationState(f=f0)
    ledger = BalanceLedger.start(f0, grid)
    trace = TraceRecord(faces=ctx.faces, keep_values=scenario.output.keep_traces)
    audits = AuditInputs()
    theta = ctx.bc.theta if ctx.bc.kind == BoundaryKind.REFLECTION else None
    step_log: List[Dict[str, Any]] = []
    max_state_change = 0.0
    max_adi_defect = 0.0
    dissipation_skipped = 0
    pending: List[TraceIncrement] = []

    def emit(current: SimulationState) -> None:
        _audit_snapshot(current.f, ctx, audits)
        entropy_and_energy(current.f, current.t, ledger, pending)
        pending.clear()
        row = ledger.rows[-1]
        if sink is not None:
            sink(row)

    emit(state)
    for n in range(n_steps):
        try:
            new_state, report = step(state, ctx, dt)
        except KineticError as exc:
            raise SolverError(f"step {n + 1} failed: {exc}", t=state.t) from exc
        for inc in report.traces:
            trace.add(inc)
        pending.extend(report.traces)
        ledger.record_collision(report.collision, dt)

        macro, reg, coeffs = coefficients_for(new_state.f, ctx)
        fisher = weighted_fisher(new_state.f, grid, coeffs.rate * coeffs.T)
        source = renorm_source(new_state.f, grid, coeffs.rate, scenario.epsilon)
        moment_d = dissipation_functional(new_state.f, grid, macro, ctx.model, reg)
        dissipation_skipped = max(dissipation_skipped, moment_d.skipped)
        audits.functional_min = min(audits.functional_min, moment_d.value)
        ledger.record_step(state.f, new_state.f, report.traces, dt, fisher, source, moment_d.value,
                           report.picard_iterations, max(report.coefficient_changes, default=0.0),
                           report.flagged, theta)
        scale = max(float(np.max(np.abs(state.f))), 1e-300)
        max_state_change = max(max_state_change, float(np.max(np.abs(new_state.f - state.f))) / scale)
        max_adi_defect = max(max_adi_defect, report.collision.adi_defect)
        step_log.append({"t": new_state.t, "picard_iterations": report.picard_iterations,
                         "flagged": report.flagged, "coefficient_changes": report.coefficient_changes})
        state = new_state
        if (n + 1) % scenario.output.cadence == 0 or n + 1 == n_steps:
            emit(state)

    verdicts = evaluate_verdicts(ledger, audits, scenario.tolerances, reflection=theta is not None)
    corner_in, corner_out = trace.corner_totals("mass")
    measurements = {
        "steps": float(n_steps),
        "dt": dt,
        "m3_integral": ledger.m3_cum,
        "fisher_integral": ledger.fisher_cum,
        "dissipation_integral": ledger.D_cum,
        "dissipation_functional_integral": ledger.functional_cum,
        "dissipation_skipped_cells": float(dissipation_skipped),
        "renorm_source_integral": ledger.renorm_source_cum,
        "fisher_identity_residual": ledger.fisher_identity_residual(),
        "max_state_change": max_state_change,
        "max_adi_defect": max_adi_defect,
        "max_mass_defect": ledger.max_mass_defect,
        "energy_excess": max((r["energy_slack"] for r in ledger.rows), default=0.0),
        "max_reflection_defect": ledger.max_reflection_defect,
        "mollify_lhs_over_mid": audits.mollify_lhs_mid,
        "mollify_mid_over_rhs": audits.mollify_mid_rhs,
        "truncation_fraction": truncation_fraction(state.f, grid),
        "corner_influx_mass": corner_in,
        "corner_outflux_mass": corner_out,
        "rho_floor": ctx.rho_floor,
        "flagged_steps": float(ledger.flagged_steps),
    }
    failed = [v.name for v in verdicts if not v.passed]
    logger.info("finished '%s': %d/%d audits passed%s", scenario.name, len(verdicts) - len(failed), len(verdicts),
                f" (failed: {', '.join(failed)})" if failed else "")
    return SimulationOutput(final_state=state, rows=ledger.rows, trace=trace, ledger=ledger, verdicts=verdicts,
                            measurements=measurements, step_reports=step_log)


# =============================================================================
# EPSILON SWEEP
# =============================================================================


@dataclass
class SweepReport:
    rows: List[Dict[str, Any]]
    bounds: Dict[str, float]

    @property
    def passed(self) -> bool:
        return bool(self.bounds["uniform"]) and all(row["passed"] for row in self.rows)


def sweep_variation(epsilons: Sequence[float], values: Sequence[float]) -> Tuple[float, bool, bool]:
    """(max / min ratio, strictly increasing, blow-up) for values ordered by decreasing epsilon.

    Blow-up means strictly increasing over at least three positive epsilons
    with a growth rate per unit of log(1 / eps) that never slows down, which is
    at least logarithmic divergence as eps -> 0.
    """
    low, high = min(values), max(values)
    if high == 0.0:
        return 1.0, False, False
    ratio = high / low if low > 0 else float("inf")
    increasing = len(values) > 1 and all(b > a for a, b in zip(values, values[1:]))
    if not increasing or len(values) < 3 or min(epsilons) <= 0.0:
        return ratio, increasing, False
    slopes = [(b - a) / np.log(e0 / e1) for a, b, e0, e1 in zip(values, values[1:], epsilons, epsilons[1:])]
    blow_up = all(s1 >= s0 for s0, s1 in zip(slopes, slopes[1:]))
    return ratio, increasing, blow_up


def epsilon_sweep(scenario: Scenario, epsilons: Sequence[float], workers: int = 1,
                  snapshots: Optional[Dict[str, np.ndarray]] = None) -> SweepReport:
    """Run a scenario for each epsilon and bound the time-integrated third moment and Fisher information.

    Epsilons run in decreasing order, duplicates dropped. The sweep is uniform
    when each quantity varies by less than a factor of 2 over the list and
    neither shows a blow-up as epsilon decreases.
    """
    if not epsilons:
        raise ScenarioError("sweep needs at least one epsilon", "eps")
    ordered = sorted({float(eps) for eps in epsilons}, reverse=True)
    rows = []
    for eps in ordered:
        output = run(replace(scenario, epsilon=eps), workers=workers, snapshots=snapshots)
        rows.append({
            "epsilon": eps,
            "m3_integral": output.measurements["m3_integral"],
            "fisher_integral": output.measurements["fisher_integral"],
            "passed": output.passed,
            "failures": output.failures,
        })
    m3 = [row["m3_integral"] for row in rows]
    fisher = [row["fisher_integral"] for row in rows]
    m3_ratio, m3_increasing, m3_blow_up = sweep_variation(ordered, m3)
    fisher_ratio, fisher_increasing, fisher_blow_up = sweep_variation(ordered, fisher)
    bounds = {
        "m3_max": max(m3),
        "fisher_max": max(fisher),
        "m3_ratio": m3_ratio,
        "fisher_ratio": fisher_ratio,
        "m3_monotone_increase": m3_increasing,
        "fisher_monotone_increase": fisher_increasing,
        "m3_blow_up": m3_blow_up,
        "fisher_blow_up": fisher_blow_up,
        "uniform": m3_ratio < 2.0 and fisher_ratio < 2.0 and not (m3_blow_up or fisher_blow_up),
    }
    if m3_blow_up or fisher_blow_up:
        logger.warning("sweep growth does not slow as eps decreases (m3 %s, fisher %s)", m3_blow_up, fisher_blow_up)
    logger.info("sweep over eps=%s: m3 ratio %.3f, fisher ratio %.3f", ordered, m3_ratio, fisher_ratio)
    return SweepReport(rows=rows, bounds=bounds)
