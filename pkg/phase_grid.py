"""
Kinetic Fokker-Planck Harness - Phase Grid Module

Cell-centered tensor grids on Omega x [-Vmax, Vmax]^d, midpoint quadrature and
the classification of boundary faces into incoming, outgoing and grazing sets.

Field layout: spatial axes first, velocity axes last, so a field on a d=1 grid
has shape (Nx, Nv) and on a d=2 grid (Nx1, Nx2, Nv1, Nv2).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Sequence, Tuple, Union

import numpy as np

from errors import GridError

logger = logging.getLogger(__name__)

LOWER = -1
UPPER = 1

MIN_CELLS = 2
TAIL_FRACTION = 0.1


@dataclass(frozen=True)
class GridSpec:
    """Grid specification as read from a scenario file."""

    dim: int = 1
    lower: Tuple[float, ...] = (0.0,)
    upper: Tuple[float, ...] = (1.0,)
    nx: Tuple[int, ...] = (64,)
    vmax: float = 8.0
    nv: Tuple[int, ...] = (128,)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dim": self.dim,
            "lower": list(self.lower),
            "upper": list(self.upper),
            "nx": list(self.nx),
            "vmax": self.vmax,
            "nv": list(self.nv),
        }


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Immutable phase-space grid. Build it with `build_grid`."""

    spec: GridSpec
    dx: Tuple[float, ...]
    dv: Tuple[float, ...]
    x: Tuple[np.ndarray, ...]
    v: Tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def vmax(self) -> float:
        return self.spec.vmax

    @property
    def spatial_shape(self) -> Tuple[int, ...]:
        return tuple(self.spec.nx)

    @property
    def velocity_shape(self) -> Tuple[int, ...]:
        return tuple(self.spec.nv)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.spatial_shape + self.velocity_shape

    @property
    def dx_volume(self) -> float:
        return float(np.prod(self.dx))

    @property
    def dv_volume(self) -> float:
        return float(np.prod(self.dv))

    @property
    def cell_volume(self) -> float:
        return self.dx_volume * self.dv_volume

    @property
    def spatial_volume(self) -> float:
        """|Omega|."""
        return float(np.prod([hi - lo for lo, hi in zip(self.spec.lower, self.spec.upper)]))

    @property
    def phase_volume(self) -> float:
        return self.spatial_volume * (2.0 * self.vmax) ** self.dim

    def velocity_mesh(self) -> List[np.ndarray]:
        """Velocity components broadcast over the velocity shape."""
        return list(np.meshgrid(*self.v, indexing="ij"))

    def velocity_norm2(self) -> np.ndarray:
        """|v|^2 over the velocity shape."""
        return sum(c * c for c in self.velocity_mesh())

    def velocity_norm(self) -> np.ndarray:
        return np.sqrt(self.velocity_norm2())

    def phase_coordinates(self) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        """Spatial and velocity coordinates, each broadcastable to `shape`."""
        d = self.dim
        xs = []
        for a in range(d):
            shape = [1] * (2 * d)
            shape[a] = self.spec.nx[a]
            xs.append(self.x[a].reshape(shape))
        vs = []
        for a in range(d):
            shape = [1] * (2 * d)
            shape[d + a] = self.spec.nv[a]
            vs.append(self.v[a].reshape(shape))
        return xs, vs

    def velocity_axes(self) -> Tuple[int, ...]:
        return tuple(range(self.dim, 2 * self.dim))

    def check_field(self, f: np.ndarray, name: str = "f") -> np.ndarray:
        """Validate that `f` is a field on this grid."""
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise GridError(f"{name} has shape {f.shape}, grid expects {self.shape}")
        return f

    def same_as(self, other: "PhaseGrid") -> bool:
        return self.spec == other.spec


def build_grid(spec: GridSpec) -> PhaseGrid:
    """Build a phase grid from its specification.

    Args:
        spec: Grid specification

    Returns:
        A PhaseGrid with cell-centered coordinates

    Raises:
        GridError: If the dimension, extents or cell counts are invalid
    """
    d = spec.dim
    if d not in (1, 2):
        raise GridError(f"spatial dimension must be 1 or 2, got {d}")
    for name, seq in (("lower", spec.lower), ("upper", spec.upper), ("nx", spec.nx), ("nv", spec.nv)):
        if len(seq) != d:
            raise GridError(f"{name} needs {d} entries, got {len(seq)}")
    if min(spec.nx) < MIN_CELLS or min(spec.nv) < MIN_CELLS:
        raise GridError(f"cell count below minimum ({MIN_CELLS})")
    bounds = np.array(list(spec.lower) + list(spec.upper) + [spec.vmax], dtype=float)
    if not np.all(np.isfinite(bounds)):
        raise GridError("grid extents must be finite")
    if not spec.vmax > 0:
        raise GridError(f"velocity bound must be positive, got {spec.vmax}")
    for lo, hi in zip(spec.lower, spec.upper):
        if not hi > lo:
            raise GridError(f"spatial extent [{lo}, {hi}] is empty")

    dx = tuple((hi - lo) / n for lo, hi, n in zip(spec.lower, spec.upper, spec.nx))
    dv = tuple(2.0 * spec.vmax / n for n in spec.nv)
    x = tuple(lo + (np.arange(n) + 0.5) * h for lo, n, h in zip(spec.lower, spec.nx, dx))
    # symmetric about 0: v[k] == -v[n-1-k] exactly
    v = tuple((np.arange(n) - 0.5 * (n - 1)) * h for n, h in zip(spec.nv, dv))
    for arr in x + v:
        arr.setflags(write=False)
    spec = GridSpec(
        dim=d,
        lower=tuple(float(a) for a in spec.lower),
        upper=tuple(float(a) for a in spec.upper),
        nx=tuple(int(n) for n in spec.nx),
        vmax=float(spec.vmax),
        nv=tuple(int(n) for n in spec.nv),
    )
    return PhaseGrid(spec=spec, dx=dx, dv=dv, x=x, v=v)


def grid_1d(nx: int = 64, nv: int = 128, vmax: float = 8.0, lower: float = 0.0, upper: float = 1.0) -> PhaseGrid:
    """Shorthand for the common d=1 grid."""
    return build_grid(GridSpec(dim=1, lower=(lower,), upper=(upper,), nx=(nx,), vmax=vmax, nv=(nv,)))


Weight = Union[None, float, np.ndarray, Callable[[List[np.ndarray], List[np.ndarray]], np.ndarray]]


def integrate_phase(f: np.ndarray, grid: PhaseGrid, weight: Weight = None) -> float:
    """Midpoint rule for the integral of weight * f over phase space.

    `weight` may be None (constant 1), a scalar, an array broadcastable to the
    grid shape, or a callable receiving the spatial and velocity coordinate
    lists from `PhaseGrid.phase_coordinates`.
    """
    f = grid.check_field(f)
    if weight is None:
        integrand = f
    elif callable(weight):
        xs, vs = grid.phase_coordinates()
        integrand = f * weight(xs, vs)
    else:
        integrand = f * np.asarray(weight, dtype=float)
    if integrand.shape != grid.shape:
        raise GridError(f"weight does not broadcast to grid shape {grid.shape}")
    # C-order pairwise sum of a contiguous array: fixed order across runs
    return float(np.sum(np.ascontiguousarray(integrand))) * grid.cell_volume


def velocity_integral(values: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """Per-spatial-cell velocity integral of a phase-space array."""
    return np.sum(values, axis=grid.velocity_axes()) * grid.dv_volume


@dataclass(frozen=True, eq=False)
class BoundaryFace:
    """One face of the spatial mesh on the boundary of Omega."""

    face_id: int
    axis: int
    side: int
    cell: Tuple[int, ...]
    location: Tuple[float, ...]
    normal: Tuple[float, ...]
    area: float
    sign: np.ndarray = field(repr=False)
    corner: bool = False

    @property
    def incoming(self) -> np.ndarray:
        return self.sign < 0

    @property
    def outgoing(self) -> np.ndarray:
        return self.sign > 0

    @property
    def grazing(self) -> np.ndarray:
        return self.sign == 0

    def counts(self) -> Tuple[int, int, int]:
        """(#incoming, #outgoing, #grazing) velocity cells."""
        return int(self.incoming.sum()), int(self.outgoing.sum()), int(self.grazing.sum())


def side_sign(grid: PhaseGrid, axis: int, side: int) -> np.ndarray:
    """sign(n . v) over the velocity shape for the faces on (axis, side)."""
    n_dot_v = side * grid.velocity_mesh()[axis]
    return np.sign(n_dot_v).astype(np.int8)


def side_cells(grid: PhaseGrid, axis: int) -> List[Tuple[int, ...]]:
    """Transverse index tuples of the faces on one side, in C order."""
    others = [grid.spec.nx[b] for b in range(grid.dim) if b != axis]
    return [tuple(int(i) for i in idx) for idx in np.ndindex(*others)] if others else [()]


def classify_boundary(grid: PhaseGrid) -> List[BoundaryFace]:
    """Enumerate boundary faces, ordered by axis, then side, then transverse index."""
    d = grid.dim
    faces: List[BoundaryFace] = []
    for axis in range(d):
        area = float(np.prod([grid.dx[b] for b in range(d) if b != axis]))
        for side in (LOWER, UPPER):
            sign = side_sign(grid, axis, side)
            sign.setflags(write=False)
            normal = tuple(float(side) if b == axis else 0.0 for b in range(d))
            face_coord = grid.spec.lower[axis] if side == LOWER else grid.spec.upper[axis]
            boundary_index = 0 if side == LOWER else grid.spec.nx[axis] - 1
            for transverse in side_cells(grid, axis):
                cell = list(transverse)
                cell.insert(axis, boundary_index)
                location = [grid.x[b][cell[b]] for b in range(d)]
                location[axis] = face_coord
                corner = any(
                    cell[b] in (0, grid.spec.nx[b] - 1) for b in range(d) if b != axis
                )
                faces.append(
                    BoundaryFace(
                        face_id=len(faces),
                        axis=axis,
                        side=side,
                        cell=tuple(cell),
                        location=tuple(float(c) for c in location),
                        normal=normal,
                        area=area,
                        sign=sign,
                        corner=corner,
                    )
                )
    logger.debug("classified %d boundary faces", len(faces))
    return faces


def truncation_fraction(f: np.ndarray, grid: PhaseGrid, fraction: float = TAIL_FRACTION) -> float:
    """Mass fraction in the outer `fraction` of the velocity box (any component)."""
    f = grid.check_field(f)
    total = integrate_phase(f, grid)
    if total <= 0.0:
        return 0.0
    mesh = grid.velocity_mesh()
    near = np.zeros(grid.velocity_shape, dtype=bool)
    for comp in mesh:
        near |= np.abs(comp) >= (1.0 - fraction) * grid.vmax
    return integrate_phase(f, grid, near.astype(float)) / total


def grid_from_sequence(dim: int, lower: Sequence[float], upper: Sequence[float], nx: Sequence[int],
                       vmax: float, nv: Sequence[int]) -> PhaseGrid:
    """Build a grid from plain sequences (snapshot headers, tests)."""
    return build_grid(GridSpec(dim=dim, lower=tuple(lower), upper=tuple(upper), nx=tuple(nx), vmax=vmax, nv=tuple(nv)))
