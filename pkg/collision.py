"""
Kinetic Fokker-Planck Harness - Collision Module

Collision-frequency registry and the implicit velocity-space step for
(nu + eps) div_v (T grad_v f + ([[v]] - u) f), applied per spatial cell with
Chang-Cooper (exponentially fitted) fluxes and zero flux at the velocity box.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve_banded
from scipy.special import exprel

from errors import ModelError, SolverError
from moments import MacroFields, RegularizedFields, check_nonnegative, renorm_velocity_field
from phase_grid import PhaseGrid, velocity_integral

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-30
NEGATIVE_TOLERANCE = 1e-14

CLOSURES = ("nonlinear", "constant_temperature", "linear")


# =============================================================================
# COLLISION FREQUENCY MODELS
# =============================================================================


def _temperature(rho: np.ndarray, V: np.ndarray) -> np.ndarray:
    safe = np.where(rho > 0, rho, 1.0)
    return np.where(rho > 0, V / safe, 0.0)


def _constant(rho, j, V, params):
    return np.full(np.shape(rho), float(params.get("value", 1.0)))


def _density_saturating(rho, j, V, params):
    return rho / (1.0 + rho)


def _power_saturating(rho, j, V, params):
    s = rho ** params["alpha"] * _temperature(rho, V) ** params["beta"]
    return s / (1.0 + s)


def _table(rho, j, V, params):
    return np.interp(rho, params["rho"], params["nu"])


def _power_zero_set(params: Dict[str, Any]) -> str:
    if params["beta"] > 0:
        return "cold"
    return "vacuum" if params["alpha"] > 0 else "never"


def _table_zero_set(params: Dict[str, Any]) -> str:
    return "vacuum" if params["nu"][0] == 0.0 and params["rho"][0] == 0.0 else "never"


# Each registration declares its supremum; a model without one is rejected.
COLLISION_MODELS: Dict[str, Dict[str, Any]] = {
    "constant": {
        "description": "nu = value (default 1)",
        "evaluate": _constant,
        "defaults": {"value": 1.0},
        "supremum": lambda p: float(p["value"]),
        "zero_set": lambda p: "never",
    },
    "density_saturating": {
        "description": "nu = rho / (1 + rho)",
        "evaluate": _density_saturating,
        "defaults": {},
        "supremum": lambda p: 1.0,
        "zero_set": lambda p: "vacuum",
    },
    "power_saturating": {
        "description": "nu = rho^alpha T^beta / (1 + rho^alpha T^beta)",
        "evaluate": _power_saturating,
        "defaults": {"alpha": 1.0, "beta": 1.0},
        "supremum": lambda p: 1.0,
        "zero_set": _power_zero_set,
    },
    "table": {
        "description": "nu interpolated linearly in rho from a table",
        "evaluate": _table,
        "defaults": {},
        "supremum": lambda p: p.get("supremum"),
        "zero_set": _table_zero_set,
    },
}


@dataclass(frozen=True)
class CollisionFrequencyModel:
    """A registered collision frequency nu(rho, j, V) with its declared bound.

    zero_set is one of "never" (nu > 0 everywhere), "vacuum" (nu = 0 exactly
    where rho = 0) or "cold" (nu = 0 where rho = 0 or V = 0).
    """

    name: str
    params: Dict[str, Any]
    supremum: float
    zero_set: str
    evaluate: Callable = field(repr=False, compare=False)

    def to_dict(self) -> Dict[str, Any]:
        return {"model": self.name, "params": dict(self.params)}


def build_collision_model(name: str, params: Optional[Dict[str, Any]] = None) -> CollisionFrequencyModel:
    """Look up a registered model and validate its parameters.

    Raises:
        ModelError: Unknown model, invalid parameters or undeclared supremum
    """
    entry = COLLISION_MODELS.get(name)
    if entry is None:
        raise ModelError(f"unknown collision model '{name}' (known: {', '.join(COLLISION_MODELS)})")
    merged = dict(entry["defaults"])
    merged.update(params or {})

    if name == "constant" and not merged["value"] > 0:
        raise ModelError("constant collision frequency must be positive")
    if name == "power_saturating":
        if merged["alpha"] < 0 or merged["beta"] < 0:
            raise ModelError("power_saturating exponents must be nonnegative")
    if name == "table":
        if "rho" not in merged or "nu" not in merged:
            raise ModelError("table model needs 'rho' and 'nu' lists")
        rho = np.asarray(merged["rho"], dtype=float)
        nu = np.asarray(merged["nu"], dtype=float)
        if rho.ndim != 1 or rho.shape != nu.shape or rho.size < 2:
            raise ModelError("table 'rho' and 'nu' must be equal-length lists of at least 2 entries")
        if rho[0] != 0.0 or np.any(np.diff(rho) <= 0):
            raise ModelError("table 'rho' must start at 0 and increase strictly")
        if np.any(nu[1:] <= 0) or nu[0] < 0:
            raise ModelError("table 'nu' must be positive for rho > 0 and nonnegative at rho = 0")
        merged["rho"] = [float(r) for r in rho]
        merged["nu"] = [float(n) for n in nu]

    supremum = entry["supremum"](merged)
    if supremum is None:
        raise ModelError(f"collision model '{name}' does not declare a supremum")
    supremum = float(supremum)
    if name == "table" and max(merged["nu"]) > supremum:
        raise ModelError(f"table values exceed the declared supremum {supremum}")
    return CollisionFrequencyModel(
        name=name,
        params=merged,
        supremum=supremum,
        zero_set=entry["zero_set"](merged),
        evaluate=entry["evaluate"],
    )


def eval_collision_frequency(model: CollisionFrequencyModel, rho, j, V) -> np.ndarray:
    """Evaluate nu(rho, j, V); j carries its components on the last axis."""
    rho = np.asarray(rho, dtype=float)
    V = np.asarray(V, dtype=float)
    j = np.asarray(j, dtype=float)
    for name, arr in (("rho", rho), ("j", j), ("V", V)):
        if not np.all(np.isfinite(arr)):
            raise ModelError(f"non-finite {name} passed to collision model '{model.name}'")
    if np.any(rho < 0) or np.any(V < 0):
        raise ModelError("collision frequency needs rho >= 0 and V >= 0")
    nu = np.asarray(model.evaluate(rho, j, V, model.params), dtype=float)
    return float(nu) if nu.ndim == 0 else nu


# =============================================================================
# COEFFICIENTS
# =============================================================================


@dataclass
class CollisionCoefficients:
    """Frozen per-cell coefficients of one collision substep."""

    rate: np.ndarray
    T: np.ndarray
    u: np.ndarray
    epsilon: float
    unregularized_drift: bool = False

    def change_from(self, other: "CollisionCoefficients") -> float:
        """Largest relative change of (rate, T, u) against another coefficient set."""
        changes = []
        for new, old in ((self.rate, other.rate), (self.T, other.T)):
            scale = max(float(np.max(np.abs(old))), 1e-300)
            changes.append(float(np.max(np.abs(new - old))) / scale)
        # drift measured against the thermal speed
        u_scale = max(float(np.max(np.abs(other.u))) + float(np.sqrt(np.max(other.T))), 1e-300)
        changes.append(float(np.max(np.abs(self.u - other.u))) / u_scale)
        return max(changes)


def collision_coefficients(
    macro: MacroFields,
    reg: RegularizedFields,
    model: CollisionFrequencyModel,
    closure: str = "nonlinear",
    unregularized_drift: bool = False,
) -> CollisionCoefficients:
    """Assemble (nu + eps, T, u) for one substep under the chosen closure."""
    eps = reg.epsilon
    if closure == "nonlinear":
        nu = eval_collision_frequency(model, macro.rho, macro.j, macro.V)
        rate, T, u = nu + eps, reg.T_eps, reg.u_eps
    elif closure == "constant_temperature":
        rate = np.full_like(macro.rho, 1.0 + eps)
        T, u = np.ones_like(macro.rho), reg.u_eps
    elif closure == "linear":
        rate = np.full_like(macro.rho, 1.0 + eps)
        T, u = np.ones_like(macro.rho), np.zeros_like(macro.j)
    else:
        raise ModelError(f"unknown closure '{closure}' (known: {', '.join(CLOSURES)})")
    return CollisionCoefficients(
        rate=np.asarray(rate, dtype=float),
        T=np.asarray(T, dtype=float),
        u=np.asarray(u, dtype=float),
        epsilon=eps,
        unregularized_drift=unregularized_drift,
    )


# =============================================================================
# CHANG-COOPER LINE OPERATOR
# =============================================================================


def bernoulli(z: np.ndarray) -> np.ndarray:
    """B(z) = z / (e^z - 1)."""
    return 1.0 / exprel(z)


def drift_potential(speed: np.ndarray, epsilon: float, unregularized: bool = False) -> np.ndarray:
    """Antiderivative psi(r) of the renormalized speed r / (1 + eps (1 + r)), psi(0) = 0.

    psi = (c / eps^2) (x - log(1 + x)) with c = 1 + eps and x = eps r / c; the
    series in x is used near zero where the difference cancels.
    """
    speed = np.asarray(speed, dtype=float)
    if unregularized or epsilon == 0.0:
        return 0.5 * speed ** 2
    c = 1.0 + epsilon
    x = epsilon * speed / c
    series = x * x * (0.5 - x / 3.0 + x * x / 4.0 - x ** 3 / 5.0 + x ** 4 / 6.0)
    tail = np.where(x < 1e-3, series, x - np.log1p(x))
    return (c / epsilon ** 2) * tail


def _drift_field(grid: PhaseGrid, axis: int, epsilon: float, unregularized: bool) -> np.ndarray:
    """Face drift along one velocity axis as the difference quotient of psi(|v|).

    The renormalized field is the gradient of psi(|v|), so every line sweep sees
    the same potential and exp(-(psi - u.v) / T) is its exact discrete null state.
    Shape (M, N - 1): M lines (other components, flattened) by N - 1 interior faces.
    """
    v_axis = grid.v[axis]
    others = [grid.v[b] for b in range(grid.dim) if b != axis]
    comps = np.meshgrid(*(others + [v_axis]), indexing="ij")
    speed = np.sqrt(sum(c * c for c in comps))
    psi = drift_potential(speed, epsilon, unregularized)
    w = np.diff(psi, axis=-1) / grid.dv[axis]
    return w.reshape(-1, v_axis.size - 1)


def _to_lines(values: np.ndarray, axis: int) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """(ncell, *velocity) -> (ncell, M, N) with velocity axis `axis` last."""
    moved = np.moveaxis(values, 1 + axis, -1)
    shape = moved.shape
    return moved.reshape(shape[0], -1, shape[-1]), shape


def _from_lines(lines: np.ndarray, shape: Tuple[int, ...], axis: int) -> np.ndarray:
    return np.moveaxis(lines.reshape(shape), -1, 1 + axis)


@dataclass
class _LineOperator:
    """Tridiagonal Chang-Cooper operator on a chunk of velocity lines."""

    peclet: np.ndarray
    rate: np.ndarray
    T: np.ndarray
    dv: float

    @classmethod
    def assemble(cls, w_face: np.ndarray, rate: np.ndarray, T: np.ndarray, u_axis: np.ndarray, dv: float):
        drift = w_face[None, :, :] - u_axis[:, None, None]
        peclet = drift * dv / T[:, None, None]
        return cls(peclet=peclet, rate=rate[:, None, None], T=T[:, None, None], dv=dv)

    def flux(self, lines: np.ndarray) -> np.ndarray:
        """J_{k+1/2} = (T / dv) [B(-Pe) f_{k+1} - B(Pe) f_k]."""
        return (self.T / self.dv) * (
            bernoulli(-self.peclet) * lines[..., 1:] - bernoulli(self.peclet) * lines[..., :-1]
        )

    def apply(self, lines: np.ndarray) -> np.ndarray:
        J = self.rate * self.flux(lines) / self.dv
        out = np.zeros_like(lines)
        out[..., :-1] += J
        out[..., 1:] -= J
        return out

    def solve(self, rhs: np.ndarray, theta_dt: float) -> np.ndarray:
        """Solve (I - theta_dt L) x = rhs for every line at once."""
        alpha = self.rate * self.T / self.dv ** 2
        up = alpha * bernoulli(-self.peclet)
        low = alpha * bernoulli(self.peclet)
        n_lines = rhs.shape[0] * rhs.shape[1]
        N = rhs.shape[-1]
        ab = np.zeros((3,) + rhs.shape)
        ab[1] = 1.0
        ab[1, ..., :-1] += theta_dt * low
        ab[1, ..., 1:] += theta_dt * up
        ab[0, ..., 1:] = -theta_dt * up
        ab[2, ..., :-1] = -theta_dt * low
        # lines are stacked with zero coupling, so the banded system is block diagonal
        ab = ab.reshape(3, n_lines * N)
        try:
            x = solve_banded((1, 1), ab, rhs.reshape(-1), overwrite_ab=True, overwrite_b=False)
        except (LinAlgError, ValueError) as exc:
            raise SolverError(f"collision line solve failed: {exc}") from exc
        return x.reshape(rhs.shape)

    def entropy_terms(self, lines: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Per-line dissipation D and drift-work source S with sum(log f * L f) = S - D.

        With x = log f_{k+1} + Pe/2 and y = log f_k - Pe/2 the face flux is
        (T/dv) B(-|Pe|) e^{-|Pe|/2} (e^x - e^y), so each face term of D is a
        positive factor times (e^x - e^y)(x - y) and never negative.
        """
        J = self.flux(lines)
        logs = np.log(np.maximum(lines, LOG_FLOOR))
        x = logs[..., 1:] + 0.5 * self.peclet
        y = logs[..., :-1] - 0.5 * self.peclet
        top = np.maximum(x, y)
        half = 0.5 * np.abs(self.peclet)
        D = (
            self.rate * (self.T / self.dv) * bernoulli(-2.0 * half)
            * np.exp(top - half) * (np.exp(x - top) - np.exp(y - top)) * (x - y)
        )
        floor = (lines[..., 1:] <= LOG_FLOOR) & (lines[..., :-1] <= LOG_FLOOR)
        D = np.where(floor, 0.0, D)
        S = self.rate * J * self.peclet
        return D.sum(axis=-1), S.sum(axis=-1)


def _sweep(lines_f, op: _LineOperator, dt: float, crank_nicolson: bool):
    if crank_nicolson:
        rhs = lines_f + 0.5 * dt * op.apply(lines_f)
        out = op.solve(rhs, 0.5 * dt)
    else:
        out = op.solve(lines_f, dt)
    D, S = op.entropy_terms(out)
    return out, D, S


def _collide_chunk(f_chunk, rate, T, u, drifts, grid: PhaseGrid, dt, crank_nicolson):
    """Collision step for a chunk of cells; returns (f, D, S, adi_defect)."""
    d = grid.dim

    def run_sweeps(values, order):
        D_tot = np.zeros(values.shape[0])
        S_tot = np.zeros(values.shape[0])
        for axis in order:
            lines, shape = _to_lines(values, axis)
            op = _LineOperator.assemble(drifts[axis], rate, T, u[:, axis], grid.dv[axis])
            out, D, S = _sweep(lines, op, dt, crank_nicolson)
            other_dv = float(np.prod([grid.dv[b] for b in range(d) if b != axis]))
            D_tot += other_dv * D.sum(axis=-1)
            S_tot += other_dv * S.sum(axis=-1)
            values = _from_lines(out, shape, axis)
        return values, D_tot, S_tot

    if d == 1:
        out, D, S = run_sweeps(f_chunk, (0,))
        return out, D, S, 0.0
    a, D_a, S_a = run_sweeps(f_chunk, (0, 1))
    b, D_b, S_b = run_sweeps(f_chunk, (1, 0))
    defect = float(np.max(np.abs(a - b))) if a.size else 0.0
    return 0.5 * (a + b), 0.5 * (D_a + D_b), 0.5 * (S_a + S_b), defect


@dataclass
class CollisionStepReport:
    """Bookkeeping of one collision substep. Per-cell arrays are velocity integrals."""

    mass_change: float
    min_value: float
    linear_solves: int
    dissipation: np.ndarray
    source: np.ndarray
    work: np.ndarray
    work_scale: np.ndarray
    dissipation_total: float = 0.0
    source_total: float = 0.0
    clipped: float = 0.0
    adi_defect: float = 0.0


def deterministic_reductions() -> bool:
    return os.environ.get("KFP_DETERMINISTIC", "1") != "0"


def collision_step(
    f: np.ndarray,
    grid: PhaseGrid,
    coeffs: CollisionCoefficients,
    dt: float,
    workers: int = 1,
    crank_nicolson: bool = False,
) -> Tuple[np.ndarray, CollisionStepReport]:
    """Advance the velocity-space operator by dt in every spatial cell.

    Backward Euler by default, Crank-Nicolson when requested; d=2 uses
    symmetrized alternating-direction sweeps.

    Raises:
        SolverError: Linear-solve failure or negativity beyond round-off
    """
    f = grid.check_field(f)
    if not dt > 0:
        raise SolverError(f"collision step needs dt > 0, got {dt}")
    check_nonnegative(f, "collision input")
    d = grid.dim
    ncell = int(np.prod(grid.spatial_shape))
    flat = f.reshape((ncell,) + grid.velocity_shape)
    rate = coeffs.rate.reshape(ncell)
    T = coeffs.T.reshape(ncell)
    u = coeffs.u.reshape(ncell, d)
    drifts = {a: _drift_field(grid, a, coeffs.epsilon, coeffs.unregularized_drift) for a in range(d)}

    workers = max(1, int(workers))
    chunks = [c for c in np.array_split(np.arange(ncell), workers) if c.size]
    out = np.empty_like(flat)
    D = np.empty(ncell)
    S = np.empty(ncell)
    defects: List[float] = []

    def task(idx):
        s = slice(idx[0], idx[-1] + 1)
        return s, _collide_chunk(flat[s], rate[s], T[s], u[s], drifts, grid, dt, crank_nicolson)

    deterministic = deterministic_reductions()
    if len(chunks) == 1:
        results = [task(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(task, c) for c in chunks]
            ordered = futures if deterministic else as_completed(futures)
            results = [fut.result() for fut in ordered]
    partial_D: List[float] = []
    partial_S: List[float] = []
    for s, (chunk_f, chunk_D, chunk_S, defect) in results:
        out[s] = chunk_f
        D[s] = chunk_D
        S[s] = chunk_S
        partial_D.append(float(np.sum(chunk_D)))
        partial_S.append(float(np.sum(chunk_S)))
        defects.append(defect)
    if deterministic:
        # one reduction over the assembled array, independent of the chunking
        D_total, S_total = float(np.sum(D)), float(np.sum(S))
    else:
        D_total, S_total = sum(partial_D), sum(partial_S)

    f_new = out.reshape(grid.shape)
    if not np.all(np.isfinite(f_new)):
        raise SolverError("collision step produced non-finite values")
    scale = float(np.max(np.abs(f_new))) if f_new.size else 0.0
    low = float(np.min(f_new)) if f_new.size else 0.0
    if low < -NEGATIVE_TOLERANCE * scale:
        raise SolverError(f"collision step went negative ({low:.3e}, scale {scale:.3e})")
    clipped = 0.0
    if low < 0.0:
        negative = np.minimum(f_new, 0.0)
        clipped = float(-np.sum(negative)) * grid.cell_volume
        f_new = f_new - negative
        logger.debug("clipped round-off negatives, mass %.3e", clipped)

    rho_old = velocity_integral(f, grid)
    rho_new = velocity_integral(f_new, grid)
    mass_change = float(np.max(np.abs(rho_new - rho_old) / np.maximum(rho_old, 1e-300))) if ncell else 0.0
    work, work_scale = collision_work(0.5 * (f + f_new) if crank_nicolson else f_new, grid, coeffs)
    sweeps = d if d == 1 else 2 * d
    report = CollisionStepReport(
        mass_change=mass_change,
        min_value=float(np.min(f_new)),
        linear_solves=len(chunks) * sweeps,
        dissipation=D.reshape(grid.spatial_shape),
        source=S.reshape(grid.spatial_shape),
        work=dt * work,
        work_scale=dt * work_scale,
        dissipation_total=D_total,
        source_total=S_total,
        clipped=clipped,
        adi_defect=max(defects) if defects else 0.0,
    )
    return f_new, report


# =============================================================================
# EQUILIBRIA AND RESIDUALS
# =============================================================================


def collision_dissipation(f: np.ndarray, grid: PhaseGrid, coeffs: CollisionCoefficients) -> np.ndarray:
    """Per-cell face dissipation of the collision operator at f, summed over velocity axes."""
    f = grid.check_field(f)
    d = grid.dim
    ncell = int(np.prod(grid.spatial_shape))
    flat = f.reshape((ncell,) + grid.velocity_shape)
    rate = np.broadcast_to(coeffs.rate, grid.spatial_shape).reshape(ncell)
    T = np.broadcast_to(coeffs.T, grid.spatial_shape).reshape(ncell)
    u = coeffs.u.reshape(ncell, d)
    total = np.zeros(ncell)
    for axis in range(d):
        lines, _ = _to_lines(flat, axis)
        w_face = _drift_field(grid, axis, coeffs.epsilon, coeffs.unregularized_drift)
        op = _LineOperator.assemble(w_face, rate, T, u[:, axis], grid.dv[axis])
        D, _ = op.entropy_terms(lines)
        other_dv = float(np.prod([grid.dv[b] for b in range(d) if b != axis]))
        total += other_dv * D.sum(axis=-1)
    return total.reshape(grid.spatial_shape)


def collision_work(f: np.ndarray, grid: PhaseGrid, coeffs: CollisionCoefficients) -> Tuple[np.ndarray, np.ndarray]:
    """Rate of change of int |v|^2 f under the collision operator, and its gross size.

    work  = (nu + eps) (2 d T rho - 2 int v.([[v]] - u) f)
    scale = (nu + eps) (2 d T rho + 2 int |v.([[v]] - u)| f)
    Both per spatial cell. Positive work is heating.
    """
    f = grid.check_field(f)
    d = grid.dim
    mesh = grid.velocity_mesh()
    if coeffs.unregularized_drift or coeffs.epsilon == 0.0:
        w = np.stack(np.broadcast_arrays(*mesh), axis=-1)
    else:
        w = renorm_velocity_field(mesh, coeffs.epsilon)
    cells = grid.spatial_shape + (1,) * d
    u = coeffs.u.reshape(grid.spatial_shape + (d,))
    drift = sum(mesh[a] * (w[..., a] - u[..., a].reshape(cells)) for a in range(d))
    rho = velocity_integral(f, grid)
    heating = 2.0 * d * coeffs.T * rho
    work = coeffs.rate * (heating - 2.0 * velocity_integral(drift * f, grid))
    scale = coeffs.rate * (heating + 2.0 * velocity_integral(np.abs(drift) * f, grid))
    return work, scale


def discrete_equilibrium(coeffs: CollisionCoefficients, grid: PhaseGrid, rho: np.ndarray) -> np.ndarray:
    """Stationary state of the collision step with the given coefficients and densities.

    exp(-(psi(|v|) - u.v) / T) sampled at the cell centers: the face drifts are
    differences of the same potential, so the Chang-Cooper flux vanishes on
    every face of every sweep.
    """
    d = grid.dim
    ncell = int(np.prod(grid.spatial_shape))
    T = coeffs.T.reshape(ncell)
    u = coeffs.u.reshape(ncell, d)
    mesh = grid.velocity_mesh()
    psi = drift_potential(grid.velocity_norm(), coeffs.epsilon, coeffs.unregularized_drift)
    expand = (-1,) + (1,) * d
    u_dot_v = sum(u[:, a].reshape(expand) * mesh[a][None] for a in range(d))
    log_g = -(psi[None] - u_dot_v) / T.reshape(expand)
    log_g = log_g - np.max(log_g.reshape(ncell, -1), axis=-1).reshape((ncell,) + (1,) * d)
    G = np.exp(log_g)
    mass = np.sum(G.reshape(ncell, -1), axis=-1) * grid.dv_volume
    G = G * (np.asarray(rho, dtype=float).reshape(ncell) / mass).reshape((ncell,) + (1,) * d)
    return G.reshape(grid.shape)


def relative_entropy(f: np.ndarray, G: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """Per-cell integral of f log(f / G) with 0 log 0 = 0."""
    positive = f > LOG_FLOOR
    ratio = np.where(positive, f, 1.0) / np.maximum(G, LOG_FLOOR)
    return velocity_integral(np.where(positive, f * np.log(ratio), 0.0), grid)


def collision_flux_residual(
    f: np.ndarray,
    grid: PhaseGrid,
    macro: MacroFields,
    reg: RegularizedFields,
    unregularized_drift: bool = False,
) -> np.ndarray:
    """T grad_v f + ([[v]] - u) f at cell centers, components on a trailing axis.

    Central differences inside the box, one-sided at the cutoff. With
    reg.epsilon == 0 the drift is the raw velocity. Vacuum cells return zero.
    """
    f = grid.check_field(f)
    d = grid.dim
    xs, vs = grid.phase_coordinates()
    if unregularized_drift or reg.epsilon == 0.0:
        w = np.stack(np.broadcast_arrays(*vs), axis=-1)
    else:
        w = renorm_velocity_field(vs, reg.epsilon)
    shape_cells = grid.spatial_shape + (1,) * d
    T = reg.T_eps.reshape(shape_cells)
    residual = np.empty(grid.shape + (d,))
    for a in range(d):
        grad = np.gradient(f, grid.dv[a], axis=d + a)
        u_a = reg.u_eps[..., a].reshape(shape_cells)
        residual[..., a] = T * grad + (w[..., a] - u_a) * f
    residual[macro.vacuum] = 0.0
    return residual
