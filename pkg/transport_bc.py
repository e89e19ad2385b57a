"""
Kinetic Fokker-Planck Harness - Transport Module

Free transport v . grad_x f by upwind finite volumes, boundary data on the
incoming half-space (inflow, partial absorption with specular reflection, or
periodic exchange) and bookkeeping of the boundary trace with |n . v| weights.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import BoundaryError, CFLError
from moments import maxwellian
from phase_grid import LOWER, UPPER, BoundaryFace, PhaseGrid, side_sign

logger = logging.getLogger(__name__)

QUANTITIES = ("mass_in", "mass_out", "v2_in", "v2_out", "entropy_in", "entropy_out")
WEIGHTS = ("mass", "energy", "entropy")
CFL_SLACK = 1e-12


class BoundaryKind(str, Enum):
    INFLOW = "inflow"
    REFLECTION = "reflection"
    PERIODIC = "periodic"


def side_keys(grid: PhaseGrid) -> List[Tuple[int, int]]:
    """(axis, side) pairs in boundary-face order."""
    return [(axis, side) for axis in range(grid.dim) for side in (LOWER, UPPER)]


def boundary_index(grid: PhaseGrid, axis: int, side: int) -> int:
    return 0 if side == LOWER else grid.spec.nx[axis] - 1


def face_shape(grid: PhaseGrid, axis: int) -> Tuple[int, ...]:
    return tuple(n for b, n in enumerate(grid.spec.nx) if b != axis)


# =============================================================================
# BOUNDARY DATA
# =============================================================================


@dataclass
class InflowDatum:
    """Incoming boundary data g on every side of Omega.

    `tables` maps (axis, side) to arrays of shape (transverse cells..., velocity
    cells...); only incoming velocity cells are read. `function`, when given,
    overrides the tables with g(t, axis, side, grid).
    """

    kind: str = "zero"
    tables: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)
    function: Optional[Callable[[float, int, int, PhaseGrid], np.ndarray]] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def values(self, t: float, axis: int, side: int, grid: PhaseGrid) -> np.ndarray:
        shape = face_shape(grid, axis) + grid.velocity_shape
        if self.function is not None:
            g = np.broadcast_to(np.asarray(self.function(t, axis, side, grid), dtype=float), shape)
            if np.any(g < 0) or not np.all(np.isfinite(g)):
                raise BoundaryError(f"inflow datum negative or non-finite at t={t}")
            return g
        table = self.tables.get((axis, side))
        if table is None:
            return np.zeros(shape)
        return np.broadcast_to(table, shape)


def make_inflow(kind: str, grid: PhaseGrid, params: Optional[Dict[str, Any]] = None,
                snapshot: Optional[np.ndarray] = None) -> InflowDatum:
    """Build an inflow datum from a preset name.

    Args:
        kind: "zero", "maxwellian" (rho, u, T) or "tabulated" (boundary cells of `snapshot`)
        grid: Phase grid
        params: Preset parameters
        snapshot: Phase-space array for the tabulated preset

    Raises:
        BoundaryError: Unknown preset, missing snapshot or negative data
    """
    params = dict(params or {})
    tables: Dict[Tuple[int, int], np.ndarray] = {}
    if kind == "zero":
        pass
    elif kind == "maxwellian":
        M = maxwellian(float(params.get("rho", 1.0)), params.get("u", [0.0] * grid.dim),
                       float(params.get("T", 1.0)), grid)
        for axis, side in side_keys(grid):
            tables[(axis, side)] = np.broadcast_to(M, face_shape(grid, axis) + grid.velocity_shape).copy()
    elif kind == "tabulated":
        if snapshot is None:
            raise BoundaryError("tabulated inflow needs a snapshot array")
        snapshot = grid.check_field(snapshot, "inflow snapshot")
        for axis, side in side_keys(grid):
            tables[(axis, side)] = np.take(snapshot, boundary_index(grid, axis, side), axis=axis).copy()
    else:
        raise BoundaryError(f"unknown inflow preset '{kind}'")
    datum = InflowDatum(kind=kind, tables=tables, params=params)
    validate_inflow(datum, grid)
    return datum


def validate_inflow(datum: InflowDatum, grid: PhaseGrid) -> None:
    """Reject negative or non-finite tables and warn about data near the velocity cutoff."""
    for (axis, side), table in datum.tables.items():
        if not np.all(np.isfinite(table)):
            raise BoundaryError(f"inflow datum on axis {axis} side {side} is not finite")
        if np.any(table < 0):
            raise BoundaryError(f"inflow datum on axis {axis} side {side} is negative")
        incoming = np.abs(side * grid.velocity_mesh()[axis]) * (side_sign(grid, axis, side) < 0)
        flux = table * incoming
        total = float(np.sum(flux))
        if total > 0:
            near = np.zeros(grid.velocity_shape, dtype=bool)
            for comp in grid.velocity_mesh():
                near |= np.abs(comp) >= 0.9 * grid.vmax
            share = float(np.sum(flux * near)) / total
            if share > 1e-6:
                logger.warning("inflow flux on axis %d side %+d has %.2e of its mass near the velocity cutoff",
                               axis, side, share)


@dataclass
class BoundaryCondition:
    kind: BoundaryKind = BoundaryKind.INFLOW
    theta: float = 0.0
    inflow: InflowDatum = field(default_factory=InflowDatum)

    def __post_init__(self):
        self.kind = BoundaryKind(self.kind)
        if self.kind == BoundaryKind.REFLECTION and not 0.0 <= self.theta < 1.0:
            raise BoundaryError(f"reflection coefficient theta must lie in [0, 1), got {self.theta}")


def reflect_velocity(v: Sequence[float], n: Sequence[float]) -> np.ndarray:
    """Specular reflection L v = v - 2 (n . v) n across a unit normal."""
    v = np.asarray(v, dtype=float)
    n = np.asarray(n, dtype=float)
    if abs(float(np.linalg.norm(n)) - 1.0) > 1e-12:
        raise BoundaryError(f"normal must have unit length, got |n| = {np.linalg.norm(n)}")
    return v - 2.0 * np.dot(v, n) * n


# =============================================================================
# TRACE BOOKKEEPING
# =============================================================================


@dataclass
class TraceIncrement:
    """Boundary flux integrals of one transport substep, one entry per face.

    Each entry already carries |n . v| d(sigma) dv^d dt.
    """

    t: float
    dt: float
    mass_in: np.ndarray
    mass_out: np.ndarray
    v2_in: np.ndarray
    v2_out: np.ndarray
    entropy_in: np.ndarray
    entropy_out: np.ndarray
    values: Optional[Dict[Tuple[int, int], Dict[str, np.ndarray]]] = None

    def totals(self) -> Dict[str, float]:
        return {q: float(np.sum(getattr(self, q))) for q in QUANTITIES}

    def scaled(self, factor: float) -> "TraceIncrement":
        return TraceIncrement(
            t=self.t, dt=self.dt * factor,
            **{q: getattr(self, q) * factor for q in QUANTITIES},
            values=self.values,
        )

    def combined(self, other: "TraceIncrement") -> "TraceIncrement":
        return TraceIncrement(
            t=self.t, dt=self.dt + other.dt,
            **{q: getattr(self, q) + getattr(other, q) for q in QUANTITIES},
            values=self.values,
        )


@dataclass
class TraceRecord:
    """Cumulative boundary flux integrals per face and the per-substep history."""

    faces: List[BoundaryFace]
    cumulative: Dict[str, np.ndarray] = field(default_factory=dict)
    history: List[Dict[str, float]] = field(default_factory=list)
    keep_values: bool = False
    values: List[Dict[Tuple[int, int], Dict[str, np.ndarray]]] = field(default_factory=list)

    def __post_init__(self):
        if not self.cumulative:
            self.cumulative = {q: np.zeros(len(self.faces)) for q in QUANTITIES}

    def add(self, inc: TraceIncrement) -> None:
        for q in QUANTITIES:
            self.cumulative[q] = self.cumulative[q] + getattr(inc, q)
        entry = {"t": inc.t, "dt": inc.dt}
        entry.update(inc.totals())
        self.history.append(entry)
        if self.keep_values and inc.values is not None:
            self.values.append(inc.values)

    def corner_totals(self, weight: str = "mass") -> Tuple[float, float]:
        mask = np.array([face.corner for face in self.faces], dtype=bool)
        return _weighted(self.cumulative, weight, mask)


def _weighted(cumulative: Dict[str, np.ndarray], weight: str, mask=None) -> Tuple[float, float]:
    if weight in ("mass", "1"):
        inc, out = cumulative["mass_in"], cumulative["mass_out"]
    elif weight in ("energy", "1+|v|^2"):
        inc = cumulative["mass_in"] + cumulative["v2_in"]
        out = cumulative["mass_out"] + cumulative["v2_out"]
    elif weight == "entropy":
        inc, out = cumulative["entropy_in"], cumulative["entropy_out"]
    else:
        raise ValueError(f"unknown flux weight '{weight}' (known: {', '.join(WEIGHTS)})")
    if mask is not None:
        inc, out = inc[mask], out[mask]
    return float(np.sum(inc)), float(np.sum(out))


def boundary_flux_integrals(trace: TraceRecord, weight: str) -> Tuple[float, float]:
    """(incoming, outgoing) flux-weighted boundary integrals up to the current time."""
    return _weighted(trace.cumulative, weight)


def entropy_density(g: np.ndarray) -> np.ndarray:
    """g log g with 0 log 0 = 0."""
    positive = g > 0
    return np.where(positive, g * np.log(np.where(positive, g, 1.0)), 0.0)


# =============================================================================
# UPWIND TRANSPORT
# =============================================================================


def minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _slopes(f: np.ndarray, axis: int) -> np.ndarray:
    """Minmod-limited cell slopes along a spatial axis, zero in the boundary cells."""
    diff = np.diff(f, axis=axis)
    n = f.shape[axis]
    inner = minmod(np.take(diff, range(1, n - 1), axis=axis), np.take(diff, range(0, n - 2), axis=axis))
    pad = [(0, 0)] * f.ndim
    pad[axis] = (1, 1)
    return np.pad(inner, pad)


def check_cfl(grid: PhaseGrid, dt: float) -> float:
    """Courant number sum_a max|v_a| dt / dx_a; raises when it exceeds 1."""
    courant = sum(float(np.max(np.abs(grid.v[a]))) * dt / grid.dx[a] for a in range(grid.dim))
    if courant > 1.0 + CFL_SLACK:
        raise CFLError(f"time step {dt} violates the transport CFL bound (Courant number {courant:.6f})")
    return courant


def _ghost(f_side: np.ndarray, bc: BoundaryCondition, t: float, grid: PhaseGrid, axis: int, side: int,
           opposite: np.ndarray) -> np.ndarray:
    """Values entering through the faces on (axis, side), shape of `f_side`."""
    if bc.kind == BoundaryKind.INFLOW:
        return np.expand_dims(bc.inflow.values(t, axis, side, grid), axis)
    if bc.kind == BoundaryKind.REFLECTION:
        # mirrored velocity cells pair exactly on the symmetric grid
        return bc.theta * np.flip(f_side, axis=grid.dim + axis)
    return opposite


def _rates(f: np.ndarray, bc: BoundaryCondition, t: float, grid: PhaseGrid, muscl: bool):
    """Upwind right-hand side -div_x(v f) and the boundary traces it uses."""
    d = grid.dim
    _, vs = grid.phase_coordinates()
    rhs = np.zeros_like(f)
    traces = {}
    for axis in range(d):
        va = vs[axis]
        pos, neg = va > 0, va < 0
        n = f.shape[axis]
        if muscl:
            s = _slopes(f, axis)
            left = f + 0.5 * s
            right = f - 0.5 * s
        else:
            left = right = f
        interior = np.where(
            pos, np.take(left, range(0, n - 1), axis=axis),
            np.where(neg, np.take(right, range(1, n), axis=axis), 0.0),
        )
        first = np.take(right, [0], axis=axis)
        last = np.take(left, [n - 1], axis=axis)
        ghost_lo = _ghost(first, bc, t, grid, axis, LOWER, last)
        ghost_hi = _ghost(last, bc, t, grid, axis, UPPER, first)
        lower = np.where(pos, ghost_lo, np.where(neg, first, 0.0))
        upper = np.where(neg, ghost_hi, np.where(pos, last, 0.0))
        flux = va * np.concatenate([lower, interior, upper], axis=axis)
        rhs -= np.diff(flux, axis=axis) / grid.dx[axis]
        if bc.kind != BoundaryKind.PERIODIC:
            traces[(axis, LOWER)] = (np.squeeze(ghost_lo * pos, axis), np.squeeze(first * neg, axis))
            traces[(axis, UPPER)] = (np.squeeze(ghost_hi * neg, axis), np.squeeze(last * pos, axis))
    return rhs, traces


def _trace_increment(traces, grid: PhaseGrid, t: float, dt: float, keep_values: bool) -> TraceIncrement:
    """Per-face flux integrals from (incoming, outgoing) trace values."""
    d = grid.dim
    v2 = grid.velocity_norm2()
    mesh = grid.velocity_mesh()
    vel_axes = tuple(range(d - 1, 2 * d - 1))
    parts = {q: [] for q in QUANTITIES}
    for axis, side in side_keys(grid):
        n_faces = int(np.prod(face_shape(grid, axis)))
        if (axis, side) not in traces:
            for q in QUANTITIES:
                parts[q].append(np.zeros(n_faces))
            continue
        gamma_in, gamma_out = traces[(axis, side)]
        area = float(np.prod([grid.dx[b] for b in range(d) if b != axis]))
        weight = np.abs(mesh[axis]) * area * grid.dv_volume * dt
        for name, gamma in (("in", gamma_in), ("out", gamma_out)):
            parts[f"mass_{name}"].append(np.sum(gamma * weight, axis=vel_axes).reshape(n_faces))
            parts[f"v2_{name}"].append(np.sum(gamma * (v2 * weight), axis=vel_axes).reshape(n_faces))
            parts[f"entropy_{name}"].append(
                np.sum(entropy_density(gamma) * weight, axis=vel_axes).reshape(n_faces)
            )
    values = None
    if keep_values:
        values = {key: {"incoming": inc.copy(), "outgoing": out.copy()} for key, (inc, out) in traces.items()}
    return TraceIncrement(t=t, dt=dt, values=values, **{q: np.concatenate(parts[q]) for q in QUANTITIES})


def transport_step(
    f: np.ndarray,
    bc: BoundaryCondition,
    t: float,
    dt: float,
    grid: PhaseGrid,
    faces: Optional[List[BoundaryFace]] = None,
    muscl: bool = False,
    order: int = 1,
    keep_values: bool = False,
) -> Tuple[np.ndarray, TraceIncrement]:
    """Advance free transport by dt and return the boundary trace increment.

    order=1 is forward Euler; order=2 is Heun's method, a convex combination of
    two Euler stages whose traces are weighted by one half each.

    Raises:
        CFLError: dt exceeds the upwind stability bound
    """
    f = grid.check_field(f)
    if not dt > 0:
        raise CFLError(f"transport step needs dt > 0, got {dt}")
    check_cfl(grid, dt)
    if faces is not None and len(faces) != sum(int(np.prod(face_shape(grid, a))) for a, _ in side_keys(grid)):
        raise BoundaryError("boundary faces do not belong to this grid")
    rhs, traces = _rates(f, bc, t, grid, muscl)
    f1 = f + dt * rhs
    inc = _trace_increment(traces, grid, t, dt, keep_values)
    if order == 1:
        return f1, inc
    if order != 2:
        raise ValueError(f"transport order must be 1 or 2, got {order}")
    rhs2, traces2 = _rates(f1, bc, t + dt, grid, muscl)
    f_new = 0.5 * (f + (f1 + dt * rhs2))
    inc2 = _trace_increment(traces2, grid, t + dt, dt, keep_values)
    return f_new, inc.scaled(0.5).combined(inc2.scaled(0.5))
