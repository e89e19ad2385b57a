"""
Kinetic Fokker-Planck Harness - Input/Output Module

Scenario files, phase-space snapshots, ledger CSVs, run manifests and the
orchestration behind the run / check / sweep / prep commands.
"""

import json
import logging
import struct
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from collision import build_collision_model
from data_prep import DatumSpec, build_datum, convergence_report, truncate_initial
from diagnostics import CSV_VERSION, LEDGER_COLUMNS, MONOTONE_COLUMNS, Verdict, energy_slack, entropy_slack
from errors import LedgerError, ScenarioError, SnapshotError
from integrator import (
    BoundarySpec,
    CollisionSpec,
    DataSpec,
    OutputSpec,
    PicardSpec,
    Scenario,
    SimulationOutput,
    SimulationState,
    SweepReport,
    TimeSpec,
    Tolerances,
    epsilon_sweep,
    run,
)
from phase_grid import GridSpec, PhaseGrid, build_grid
from transport_bc import BoundaryKind, boundary_index, face_shape, side_keys

logger = logging.getLogger(__name__)

TOOL_VERSION = "1.0.0"
SNAPSHOT_MAGIC = b"KFPSNAP1"
SNAPSHOT_SUFFIX = ".kfps"
LEDGER_FILE = "ledger.csv"
MANIFEST_FILE = "manifest.json"
CHECK_NAMES = ("energy_slack", "entropy_slack", "nonnegativity", "monotone_cumulatives", "time_order")

SECTIONS = {
    "boundary": BoundarySpec,
    "collision": CollisionSpec,
    "time": TimeSpec,
    "picard": PicardSpec,
    "tolerances": Tolerances,
    "output": OutputSpec,
    "data": DataSpec,
}


# =============================================================================
# SCENARIO FILES
# =============================================================================


def _reject_unknown(data: Dict[str, Any], allowed: Sequence[str], path: str) -> None:
    for key in data:
        if key not in allowed:
            where = f"{path}.{key}" if path else str(key)
            raise ScenarioError(f"unknown key (allowed: {', '.join(allowed)})", where)


def _mapping(value: Any, path: str) -> Dict[str, Any]:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ScenarioError("expected a section of key: value pairs", path)
    return value


def _build_section(cls, data: Dict[str, Any], path: str):
    names = [f.name for f in fields(cls)]
    _reject_unknown(data, names, path)
    try:
        return cls(**data)
    except TypeError as e:
        raise ScenarioError(str(e), path) from e


def _grid_section(data: Dict[str, Any]) -> GridSpec:
    allowed = [f.name for f in fields(GridSpec)]
    _reject_unknown(data, allowed, "grid")
    dim = int(data.get("dim", 1))

    def seq(key: str, default, cast):
        value = data.get(key, default)
        if not isinstance(value, (list, tuple)):
            value = [value] * dim
        try:
            return tuple(cast(item) for item in value)
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"invalid entry: {e}", f"grid.{key}") from e

    defaults = GridSpec()
    return GridSpec(
        dim=dim,
        lower=seq("lower", defaults.lower[0], float),
        upper=seq("upper", defaults.upper[0], float),
        nx=seq("nx", defaults.nx[0], int),
        vmax=float(data.get("vmax", defaults.vmax)),
        nv=seq("nv", defaults.nv[0], int),
    )


def _initial_section(data: Dict[str, Any]) -> DatumSpec:
    _reject_unknown(data, ["preset", "params", "file"], "initial")
    return DatumSpec(kind=data.get("preset", "maxwellian"), params=_mapping(data.get("params"), "initial.params"),
                     path=data.get("file"))


def scenario_from_dict(data: Dict[str, Any]) -> Scenario:
    """Build and validate a Scenario from parsed sections, filling defaults."""
    data = _mapping(data, "")
    top = ["name", "epsilon", "grid", "initial"] + list(SECTIONS)
    _reject_unknown(data, top, "")
    kwargs: Dict[str, Any] = {}
    if "name" in data:
        kwargs["name"] = str(data["name"])
    if "epsilon" in data:
        try:
            kwargs["epsilon"] = float(data["epsilon"])
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"not a number: {data['epsilon']!r}", "epsilon") from e
    kwargs["grid"] = _grid_section(_mapping(data.get("grid"), "grid"))
    kwargs["initial"] = _initial_section(_mapping(data.get("initial"), "initial"))
    for name, cls in SECTIONS.items():
        kwargs[name] = _build_section(cls, _mapping(data.get(name), name), name)
    return Scenario(**kwargs).validate()


def parse_scenario(path) -> Scenario:
    """Read a YAML scenario file.

    Raises:
        ScenarioError: Missing file, malformed YAML, unknown key or constraint violation
    """
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ScenarioError(f"malformed scenario file {path}: {e}") from e
    scenario = scenario_from_dict(data or {})
    logger.debug("parsed scenario %s from %s", scenario.name, path)
    return scenario


def parse_tolerance_overrides(items: Sequence[str]) -> Dict[str, float]:
    """'key=value' pairs from the command line."""
    overrides = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ScenarioError(f"expected key=value, got '{item}'", "tolerances")
        try:
            overrides[key.strip()] = float(value)
        except ValueError as e:
            raise ScenarioError(f"not a number: '{value}'", f"tolerances.{key.strip()}") from e
    return overrides


def apply_tolerances(scenario: Scenario, overrides: Dict[str, float]) -> Scenario:
    if not overrides:
        return scenario
    _reject_unknown(overrides, [f.name for f in fields(Tolerances)], "tolerances")
    return replace(scenario, tolerances=replace(scenario.tolerances, **overrides)).validate()


def load_scenario_snapshots(scenario: Scenario, base_dir: Path) -> Dict[str, np.ndarray]:
    """Read the snapshot files a scenario refers to, relative to its own directory."""
    snapshots = {}
    grid = build_grid(scenario.grid)
    for key, name in (("initial", scenario.initial.path), ("inflow", scenario.boundary.inflow_file)):
        if name:
            snapshots[key] = read_snapshot(Path(base_dir) / name, grid).f
    return snapshots


# =============================================================================
# SNAPSHOTS
# =============================================================================


@dataclass
class Snapshot:
    spec: GridSpec
    f: np.ndarray
    t: float = 0.0


def _header_bytes(spec: GridSpec, t: float) -> bytes:
    d = spec.dim
    ints = struct.pack(f"<i{2 * d}i", d, *spec.nx, *spec.nv)
    floats = struct.pack(f"<{2 * d + 2}d", *spec.lower, *spec.upper, spec.vmax, t)
    return SNAPSHOT_MAGIC + ints + floats


def write_snapshot(state: SimulationState, grid: PhaseGrid, path) -> Path:
    """Write f and t with the grid header; payload is row-major little-endian float64."""
    path = Path(path)
    f = grid.check_field(state.f)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as out:
        out.write(_header_bytes(grid.spec, state.t))
        out.write(np.ascontiguousarray(f, dtype="<f8").tobytes(order="C"))
    return path


def read_snapshot(path, grid: Optional[PhaseGrid] = None) -> Snapshot:
    """Read a snapshot, optionally checking it against an expected grid.

    Raises:
        SnapshotError: Wrong magic, truncated header, payload size mismatch or grid mismatch
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise SnapshotError(f"cannot read snapshot {path}: {e}") from e
    if not raw.startswith(SNAPSHOT_MAGIC):
        raise SnapshotError(f"{path} is not a snapshot file")
    pos = len(SNAPSHOT_MAGIC)
    try:
        (d,) = struct.unpack_from("<i", raw, pos)
        if d not in (1, 2):
            raise SnapshotError(f"{path}: unsupported dimension {d}")
        pos += 4
        counts = struct.unpack_from(f"<{2 * d}i", raw, pos)
        pos += 8 * d
        floats = struct.unpack_from(f"<{2 * d + 2}d", raw, pos)
        pos += 8 * (2 * d + 2)
    except struct.error as e:
        raise SnapshotError(f"{path}: truncated header") from e
    spec = GridSpec(dim=d, lower=tuple(floats[:d]), upper=tuple(floats[d:2 * d]), nx=tuple(counts[:d]),
                    vmax=floats[2 * d], nv=tuple(counts[d:]))
    shape = spec.nx + spec.nv
    expected = int(np.prod(shape)) * 8
    if len(raw) - pos != expected:
        raise SnapshotError(f"{path}: payload size mismatch (expected {expected} bytes, found {len(raw) - pos})")
    f = np.frombuffer(raw, dtype="<f8", offset=pos).reshape(shape).astype(float)
    if grid is not None and spec != grid.spec:
        raise SnapshotError(f"{path}: grid mismatch (file {spec.to_dict()}, expected {grid.spec.to_dict()})")
    return Snapshot(spec=spec, f=f, t=floats[2 * d + 1])


# =============================================================================
# LEDGER CSV
# =============================================================================


def _version_line() -> str:
    return f"# kfp-ledger schema={CSV_VERSION}"


def write_ledger_csv(rows: Sequence[Dict[str, float]], path) -> Path:
    """One row per output time, columns in LEDGER_COLUMNS order, 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.array([[row[c] for c in LEDGER_COLUMNS] for row in rows], dtype=float).reshape(-1, len(LEDGER_COLUMNS))
    header = _version_line() + "\n" + ",".join(LEDGER_COLUMNS)
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="")
    return path


def read_ledger_csv(path) -> List[Dict[str, float]]:
    """Raises LedgerError on a missing file, unknown schema, wrong columns or unparsable values."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise LedgerError(f"cannot read ledger {path}: {e}") from e
    if len(lines) < 2 or lines[0].strip() != _version_line():
        raise LedgerError(f"{path}: missing or unsupported schema line (expected '{_version_line()}')")
    columns = [c.strip() for c in lines[1].split(",")]
    if tuple(columns) != LEDGER_COLUMNS:
        raise LedgerError(f"{path}: column order differs from schema {CSV_VERSION}")
    body = [line for line in lines[2:] if line.strip()]
    if not body:
        raise LedgerError(f"{path}: no rows")
    try:
        data = np.loadtxt(body, delimiter=",", ndmin=2)
    except ValueError as e:
        raise LedgerError(f"{path}: {e}") from e
    if data.shape[1] != len(LEDGER_COLUMNS):
        raise LedgerError(f"{path}: expected {len(LEDGER_COLUMNS)} values per row, got {data.shape[1]}")
    return [dict(zip(LEDGER_COLUMNS, (float(x) for x in row))) for row in data]


def check_ledger(rows: Sequence[Dict[str, float]], tolerances: Tolerances) -> List[Verdict]:
    """Re-audit a ledger from its own columns.

    The slack columns are recomputed from the budget columns and must agree
    with the stored value. The energy slack must match the stored collision
    work and the entropy slack must stay within tolerance.
    """
    first = rows[0]
    energy_scale = max(max(r["energy"] for r in rows), 1e-300)
    entropy_tol = tolerances.entropy * abs(first["entropy"]) + tolerances.entropy

    energy_residual, energy_mismatch = 0.0, 0.0
    entropy_worst, entropy_mismatch = 0.0, 0.0
    for r in rows:
        e = energy_slack(r["energy"], first["energy"], r["outflux_energy"], r["influx_energy"])
        h = entropy_slack(r["entropy"], first["entropy"], r["outflux_entropy"], r["influx_entropy"],
                          r["D_cum"], r["source_entropy"])
        energy_residual = max(energy_residual, abs(r["energy_slack"] - r["work_energy"]))
        entropy_worst = max(entropy_worst, h, r["entropy_slack"])
        energy_mismatch = max(energy_mismatch, abs(e - r["energy_slack"]))
        entropy_mismatch = max(entropy_mismatch, abs(h - r["entropy_slack"]))

    energy_tol = tolerances.energy * energy_scale + tolerances.work * max(r["work_scale"] for r in rows)
    mismatch_tol = tolerances.energy * energy_scale
    mass_scale = max(max(abs(r["mass"]) for r in rows), 1e-300)
    min_f = min(r["min_f"] for r in rows)
    monotone = 0.0
    for prev, cur in zip(rows, rows[1:]):
        for col in MONOTONE_COLUMNS:
            monotone = max(monotone, prev[col] - cur[col])
    times_ok = all(b["t"] > a["t"] for a, b in zip(rows, rows[1:]))

    return [
        Verdict("energy_slack", energy_residual <= energy_tol and energy_mismatch <= mismatch_tol,
                max(energy_residual, energy_mismatch), energy_tol, "recomputed E - E0 + out - in against work"),
        Verdict("entropy_slack", entropy_worst <= entropy_tol and entropy_mismatch <= entropy_tol,
                max(entropy_worst, entropy_mismatch), entropy_tol, "recomputed H - H0 + out - in + D - S"),
        Verdict("nonnegativity", min_f >= -tolerances.positivity * mass_scale, -min_f,
                tolerances.positivity * mass_scale, "min f against the largest mass"),
        Verdict("monotone_cumulatives", monotone <= 0.0, monotone, 0.0, "cumulative columns nondecreasing"),
        Verdict("time_order", times_ok, 0.0 if times_ok else 1.0, 0.0, "t strictly increasing"),
    ]


# =============================================================================
# MANIFEST
# =============================================================================


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


@dataclass
class RunManifest:
    """Record of one command: what ran, what was measured and which audits failed."""

    command: str
    scenario_hash: str
    scenario: Dict[str, Any]
    tool_version: str = TOOL_VERSION
    started: str = field(default_factory=_now)
    finished: str = ""
    verdicts: List[Dict[str, Any]] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)
    measurements: Dict[str, Any] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)

    def finish(self, verdicts: Sequence[Verdict]) -> "RunManifest":
        self.verdicts = [v.to_dict() for v in verdicts]
        self.failures = [v.name for v in verdicts if not v.passed]
        self.finished = _now()
        return self

    def to_dict(self) -> Dict[str, Any]:
        return _jsonable(asdict(self))


def write_manifest(manifest: RunManifest, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(manifest.to_dict(), f, indent=2, sort_keys=True)
    return path


def read_manifest(path) -> Dict[str, Any]:
    with open(path, "r") as f:
        return json.load(f)


# =============================================================================
# COMMANDS
# =============================================================================


def execute_run(scenario: Scenario, out_dir, workers: int = 1,
                snapshots: Optional[Dict[str, np.ndarray]] = None) -> Tuple[SimulationOutput, RunManifest]:
    """Run a scenario and write ledger.csv, manifest.json and (optionally) the final snapshot."""
    out_dir = Path(out_dir)
    manifest = RunManifest(command="run", scenario_hash=scenario.scenario_hash(), scenario=scenario.to_dict())
    output = run(scenario, workers=workers, snapshots=snapshots)
    manifest.outputs["ledger"] = str(write_ledger_csv(output.rows, out_dir / LEDGER_FILE))
    if scenario.output.snapshot:
        grid = build_grid(scenario.grid)
        manifest.outputs["final_state"] = str(write_snapshot(output.final_state, grid,
                                                             out_dir / f"final{SNAPSHOT_SUFFIX}"))
    manifest.measurements = dict(output.measurements)
    manifest.finish(output.verdicts)
    manifest.outputs["manifest"] = str(out_dir / MANIFEST_FILE)
    write_manifest(manifest, out_dir / MANIFEST_FILE)
    return output, manifest


def execute_check(ledger_path, tolerances: Tolerances) -> List[Verdict]:
    return check_ledger(read_ledger_csv(ledger_path), tolerances)


def write_sweep_csv(report: SweepReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = ("epsilon", "m3_integral", "fisher_integral", "passed")
    data = np.array([[row[c] for c in columns] for row in report.rows], dtype=float)
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(columns), comments="")
    return path


def execute_sweep(scenario: Scenario, epsilons: Sequence[float], out_dir, workers: int = 1,
                  snapshots: Optional[Dict[str, np.ndarray]] = None) -> Tuple[SweepReport, RunManifest]:
    out_dir = Path(out_dir)
    manifest = RunManifest(command="sweep", scenario_hash=scenario.scenario_hash(), scenario=scenario.to_dict())
    report = epsilon_sweep(scenario, epsilons, workers=workers, snapshots=snapshots)
    manifest.outputs["sweep"] = str(write_sweep_csv(report, out_dir / "sweep.csv"))
    manifest.measurements = {"rows": report.rows, "bounds": report.bounds}
    verdicts = [Verdict(f"eps={row['epsilon']:g}", row["passed"], 0.0, 0.0, ", ".join(row["failures"]) or "all audits")
                for row in report.rows]
    verdicts.append(Verdict("uniform_bounds", bool(report.bounds["uniform"]),
                            max(report.bounds["m3_ratio"], report.bounds["fisher_ratio"]), 2.0,
                            "max/min over eps of the m3 and Fisher integrals, no blow-up as eps decreases"))
    manifest.finish(verdicts)
    write_manifest(manifest, out_dir / MANIFEST_FILE)
    return report, manifest


def _boundary_measure(grid: PhaseGrid, axis: int, side: int) -> np.ndarray:
    """|n . v| d(sigma) dv^d on the incoming cells of one side, zero elsewhere."""
    v_axis = grid.velocity_mesh()[axis]
    incoming = (side * v_axis) < 0
    d_sigma = float(np.prod([h for a, h in enumerate(grid.dx) if a != axis]))
    speed = np.where(incoming, np.abs(v_axis), 0.0) * d_sigma * grid.dv_volume
    return np.broadcast_to(speed, face_shape(grid, axis) + grid.velocity_shape)


def execute_prep(scenario: Scenario, epsilons: Sequence[float], out_dir,
                 snapshots: Optional[Dict[str, np.ndarray]] = None) -> Tuple[Dict[str, Any], RunManifest]:
    """Write the truncated initial datum and the truncation convergence report.

    The report covers the initial datum and, for inflow problems, the
    boundary trace of the untruncated initial datum (or of the inflow snapshot).
    """
    out_dir = Path(out_dir)
    snapshots = snapshots or {}
    manifest = RunManifest(command="prep", scenario_hash=scenario.scenario_hash(), scenario=scenario.to_dict())
    grid = build_grid(scenario.grid)
    model = build_collision_model(scenario.collision.model, scenario.collision.params)
    f0 = build_datum(scenario.initial, grid, epsilon=scenario.epsilon, model=model,
                     closure=scenario.collision.closure,
                     unregularized_drift=scenario.collision.unregularized_drift,
                     snapshot=snapshots.get("initial"))
    truncated = truncate_initial(f0, grid, scenario.epsilon)
    manifest.outputs["initial"] = str(write_snapshot(SimulationState(f=truncated), grid,
                                                     out_dir / f"initial_truncated{SNAPSHOT_SUFFIX}"))
    reports = {"initial": convergence_report(f0, grid, epsilons)}
    if scenario.boundary.kind == BoundaryKind.INFLOW.value:
        source = snapshots.get("inflow", f0)
        for axis, side in side_keys(grid):
            table = np.take(source, boundary_index(grid, axis, side), axis=axis)
            reports[f"inflow_axis{axis}_{'lower' if side < 0 else 'upper'}"] = convergence_report(
                table, grid, epsilons, measure=_boundary_measure(grid, axis, side))
    summary = {name: {"rows": rep.rows, "monotone": rep.monotone} for name, rep in reports.items()}
    manifest.measurements = summary
    verdicts = [Verdict(f"convergence_{name}", rep.monotone, 0.0, 0.0, "L1 gap nonincreasing as eps decreases")
                for name, rep in reports.items()]
    manifest.finish(verdicts)
    manifest.outputs["report"] = str(out_dir / MANIFEST_FILE)
    write_manifest(manifest, out_dir / MANIFEST_FILE)
    return summary, manifest
