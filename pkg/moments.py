"""
Kinetic Fokker-Planck Harness - Moments Module

Macroscopic fields of a distribution (density, momentum, variance), the
saturating epsilon-renormalization, regularized temperature and bulk velocity,
and the local Maxwellian.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from errors import SolverError
from phase_grid import PhaseGrid, integrate_phase, velocity_integral

logger = logging.getLogger(__name__)

NEGATIVE_TOLERANCE = 1e-14
RHO_FLOOR_FACTOR = 1e-12

ArrayLike = Union[float, np.ndarray]


def renorm_scalar(r: ArrayLike, eps1: ArrayLike, eps2: float) -> ArrayLike:
    """Saturating renormalization r / (eps1 + eps2 (1 + r)) of a nonnegative scalar.

    eps1 may be an array (a density field) and may vanish where eps2 > 0.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("renormalization needs r >= 0")
    if not eps2 > 0:
        raise ValueError(f"eps2 must be positive, got {eps2}")
    if np.any(np.asarray(eps1) < 0):
        raise ValueError("eps1 must be nonnegative")
    out = r_arr / (eps1 + eps2 * (1.0 + r_arr))
    return float(out) if np.ndim(out) == 0 else out


def renorm_vector(r: np.ndarray, eps1: ArrayLike, eps2: float) -> np.ndarray:
    """Vector renormalization r / (eps1 + eps2 (1 + |r|)); components on the last axis."""
    r_arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r_arr)):
        raise ValueError("renormalization needs finite components")
    if not eps2 >= 0:
        raise ValueError(f"eps2 must be nonnegative, got {eps2}")
    norm = np.sqrt(np.sum(r_arr * r_arr, axis=-1, keepdims=True))
    denom = np.asarray(eps1, dtype=float)[..., None] + eps2 * (1.0 + norm)
    return r_arr / denom


def renorm_velocity_field(v_components: Sequence[np.ndarray], epsilon: float) -> np.ndarray:
    """[[v]]_1^eps = v / (1 + eps (1 + |v|)) evaluated on broadcast velocity components.

    Returns an array with the components stacked on the last axis.
    """
    v = np.stack(np.broadcast_arrays(*v_components), axis=-1)
    return renorm_vector(v, 1.0, epsilon)


def div_renorm_v(v: np.ndarray, epsilon: float) -> ArrayLike:
    """Divergence of v / (1 + eps (1 + |v|)) for d-vectors on the last axis.

    (d + eps d + eps (d-1) |v|) / (1 + eps (1 + |v|))^2
    """
    if not epsilon >= 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    d = v.shape[-1]
    norm = np.sqrt(np.sum(v * v, axis=-1))
    out = (d + epsilon * d + epsilon * (d - 1) * norm) / (1.0 + epsilon * (1.0 + norm)) ** 2
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class MacroFields:
    """Per-spatial-cell moments. `j` and `u` carry components on the last axis."""

    rho: np.ndarray
    j: np.ndarray
    e2: np.ndarray
    u: np.ndarray
    V: np.ndarray
    T: np.ndarray
    vacuum: np.ndarray
    rho_floor: float
    clamp: float = 0.0

    @property
    def dim(self) -> int:
        return self.j.shape[-1]


@dataclass
class RegularizedFields:
    T_eps: np.ndarray
    u_eps: np.ndarray
    epsilon: float


def default_rho_floor(f: np.ndarray, grid: PhaseGrid) -> float:
    """Vacuum threshold: 1e-12 times the mean density."""
    mass = integrate_phase(f, grid)
    return RHO_FLOOR_FACTOR * max(mass, 0.0) / grid.spatial_volume


def check_nonnegative(f: np.ndarray, what: str = "distribution") -> None:
    """Reject entries below -1e-14 * max|f| as corrupted state."""
    scale = float(np.max(np.abs(f))) if f.size else 0.0
    low = float(np.min(f)) if f.size else 0.0
    if low < -NEGATIVE_TOLERANCE * scale:
        raise SolverError(f"{what} has negative entry {low:.3e} (scale {scale:.3e})")
    if not np.all(np.isfinite(f)):
        raise SolverError(f"{what} has non-finite entries")


def compute_moments(f: np.ndarray, grid: PhaseGrid, rho_floor: Optional[float] = None) -> MacroFields:
    """Moments of f per spatial cell with the vacuum convention u = T = V = 0.

    Args:
        f: Distribution on `grid`
        grid: Phase grid
        rho_floor: Vacuum threshold, defaults to `default_rho_floor`

    Returns:
        MacroFields with V from (E2 - |j|^2 / rho) / d, clamped at 0
    """
    f = grid.check_field(f)
    check_nonnegative(f)
    if rho_floor is None:
        rho_floor = default_rho_floor(f, grid)
    d = grid.dim
    mesh = grid.velocity_mesh()
    rho = velocity_integral(f, grid)
    j = np.stack([velocity_integral(f * c, grid) for c in mesh], axis=-1)
    e2 = velocity_integral(f * grid.velocity_norm2(), grid)

    vacuum = rho <= rho_floor
    safe_rho = np.where(vacuum, 1.0, rho)
    j2 = np.sum(j * j, axis=-1)
    raw_V = (e2 - j2 / safe_rho) / d
    raw_V = np.where(vacuum, 0.0, raw_V)
    clamp = float(max(0.0, -np.min(raw_V))) if raw_V.size else 0.0
    V = np.maximum(raw_V, 0.0)
    u = np.where(vacuum[..., None], 0.0, j / safe_rho[..., None])
    T = np.where(vacuum, 0.0, V / safe_rho)
    if clamp > 0.0:
        logger.debug("variance clamped at 0, largest negative round-off %.3e", clamp)
    return MacroFields(rho=rho, j=j, e2=e2, u=u, V=V, T=T, vacuum=vacuum, rho_floor=float(rho_floor), clamp=clamp)


def regularize_fields(m: MacroFields, epsilon: float) -> RegularizedFields:
    """T^eps = V / (rho + eps (1 + V)) + eps and u^eps = j / (rho + eps (1 + |j|))."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    T_eps = renorm_scalar(m.V, m.rho, epsilon) + epsilon
    u_eps = renorm_vector(m.j, m.rho, epsilon)
    # exact vacuum values, independent of the floor
    T_eps = np.where(m.vacuum, epsilon, T_eps)
    u_eps = np.where(m.vacuum[..., None], 0.0, u_eps)
    return RegularizedFields(T_eps=np.asarray(T_eps, dtype=float), u_eps=u_eps, epsilon=float(epsilon))


def maxwellian(rho: float, u: Sequence[float], T: float, grid: PhaseGrid) -> np.ndarray:
    """Local Maxwellian rho / (2 pi T)^(d/2) exp(-|v - u|^2 / 2T) on the velocity cell centers."""
    d = grid.dim
    u = np.broadcast_to(np.asarray(u, dtype=float), (d,))
    if rho < 0 or T < 0:
        raise ValueError("Maxwellian needs rho >= 0 and T >= 0")
    if rho == 0:
        return np.zeros(grid.velocity_shape)
    if T == 0:
        raise ValueError("degenerate Maxwellian: rho > 0 with T = 0")
    dist2 = sum((c - u[a]) ** 2 for a, c in enumerate(grid.velocity_mesh()))
    return rho / (2.0 * np.pi * T) ** (d / 2.0) * np.exp(-dist2 / (2.0 * T))


def variance_direct(f: np.ndarray, macro: MacroFields, grid: PhaseGrid) -> np.ndarray:
    """Variance density computed as (1/d) * integral of |v - u|^2 f, per spatial cell."""
    f = grid.check_field(f)
    d = grid.dim
    mesh = grid.velocity_mesh()
    spatial_nd = len(grid.spatial_shape)
    dist2 = np.zeros(grid.shape)
    for a, c in enumerate(mesh):
        u_a = macro.u[..., a].reshape(grid.spatial_shape + (1,) * spatial_nd)
        dist2 = dist2 + (c - u_a) ** 2
    V = velocity_integral(f * dist2, grid) / d
    return np.where(macro.vacuum, 0.0, V)
