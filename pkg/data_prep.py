"""
Kinetic Fokker-Planck Harness - Data Preparation Module

Initial-datum presets, the height/velocity truncation of initial and boundary
data, and the convergence report of truncated data as epsilon decreases.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from collision import (
    CollisionCoefficients,
    CollisionFrequencyModel,
    discrete_equilibrium,
)
from errors import ScenarioError
from moments import compute_moments, maxwellian, regularize_fields
from phase_grid import PhaseGrid, integrate_phase

logger = logging.getLogger(__name__)

ENTROPY_FLOOR = 1e-30


@dataclass
class DatumSpec:
    """Initial datum: a preset name with parameters, or a snapshot path for `tabulated`."""

    kind: str = "maxwellian"
    params: Dict[str, Any] = field(default_factory=dict)
    path: Optional[str] = None


# =============================================================================
# PRESETS
# =============================================================================


def _spatial_profile(grid: PhaseGrid, amplitude: float) -> np.ndarray:
    """1 + a cos(2 pi (x - lower) / L) along the first spatial axis."""
    L = grid.spec.upper[0] - grid.spec.lower[0]
    xs, _ = grid.phase_coordinates()
    profile = 1.0 + amplitude * np.cos(2.0 * np.pi * (xs[0] - grid.spec.lower[0]) / L)
    return np.broadcast_to(profile, grid.shape)


def _velocity_field(grid: PhaseGrid, values: np.ndarray) -> np.ndarray:
    return np.broadcast_to(values, grid.shape)


def _maxwellian_preset(grid: PhaseGrid, params: Dict[str, Any], **_) -> np.ndarray:
    M = maxwellian(params["rho"], params["u"] or [0.0] * grid.dim, params["T"], grid)
    return _spatial_profile(grid, params["amplitude"]) * _velocity_field(grid, M)


def _bimodal_preset(grid: PhaseGrid, params: Dict[str, Any], **_) -> np.ndarray:
    shift = np.zeros(grid.dim)
    shift[0] = params["shift"]
    w = params["weight"]
    left = maxwellian(w * params["rho"], -shift, params["T"], grid)
    right = maxwellian((1.0 - w) * params["rho"], shift, params["T"], grid)
    return _spatial_profile(grid, params["amplitude"]) * _velocity_field(grid, left + right)


def _box_preset(grid: PhaseGrid, params: Dict[str, Any], **_) -> np.ndarray:
    xs, vs = grid.phase_coordinates()
    inside = np.ones(grid.shape, dtype=bool)
    for a in range(grid.dim):
        L = grid.spec.upper[a] - grid.spec.lower[a]
        lo, hi = params["x_range"] or (0.25, 0.75)
        inside &= (xs[a] >= grid.spec.lower[a] + lo * L) & (xs[a] <= grid.spec.lower[a] + hi * L)
        vlo, vhi = params["v_range"]
        inside &= (vs[a] >= vlo) & (vs[a] <= vhi)
    return params["height"] * inside.astype(float)


def _near_vacuum_preset(grid: PhaseGrid, params: Dict[str, Any], **_) -> np.ndarray:
    xs, _ = grid.phase_coordinates()
    L = grid.spec.upper[0] - grid.spec.lower[0]
    lo, hi = params["stripe"]
    in_stripe = (xs[0] >= grid.spec.lower[0] + lo * L) & (xs[0] <= grid.spec.lower[0] + hi * L)
    density = np.where(in_stripe, params["floor"], 1.0)
    M = maxwellian(params["rho"], [0.0] * grid.dim, params["T"], grid)
    return np.broadcast_to(density, grid.shape) * _velocity_field(grid, M)


def _heavy_tail_preset(grid: PhaseGrid, params: Dict[str, Any], **_) -> np.ndarray:
    p = params["p"]
    d = grid.dim
    # finite second moment needs 2p > d + 2
    if not p > (d + 2) / 2.0:
        raise ScenarioError(f"heavy_tail exponent p must exceed {(d + 2) / 2.0} for finite energy", "initial.params.p")
    shape = (1.0 + grid.velocity_norm2()) ** (-p)
    shape = shape * params["rho"] / (np.sum(shape) * grid.dv_volume)
    return _velocity_field(grid, shape)


def _equilibrium_preset(grid: PhaseGrid, params: Dict[str, Any], epsilon: float = 0.1,
                        model: Optional[CollisionFrequencyModel] = None, closure: str = "nonlinear",
                        unregularized_drift: bool = False, **_) -> np.ndarray:
    f, _ = equilibrium_state(grid, epsilon, params["rho"], closure, unregularized_drift)
    return f


def _tabulated_preset(grid: PhaseGrid, params: Dict[str, Any], snapshot: Optional[np.ndarray] = None, **_):
    if snapshot is None:
        raise ScenarioError("tabulated datum needs a snapshot file", "initial.file")
    return grid.check_field(snapshot, "tabulated datum")


PRESETS: Dict[str, Dict[str, Any]] = {
    "maxwellian": {
        "description": "Maxwellian (rho, u, T), optionally modulated in x",
        "build": _maxwellian_preset,
        "defaults": {"rho": 1.0, "u": None, "T": 1.0, "amplitude": 0.0},
    },
    "bimodal": {
        "description": "two Maxwellians at +/- shift along v_1",
        "build": _bimodal_preset,
        "defaults": {"rho": 1.0, "shift": 2.0, "T": 0.5, "weight": 0.5, "amplitude": 0.0},
    },
    "box": {
        "description": "indicator of a box in (x, v)",
        "build": _box_preset,
        "defaults": {"height": 1.0, "x_range": None, "v_range": [-1.0, 1.0]},
    },
    "near_vacuum": {
        "description": "Maxwellian with a stripe of (near) vacuum",
        "build": _near_vacuum_preset,
        "defaults": {"rho": 1.0, "T": 1.0, "stripe": [0.4, 0.6], "floor": 0.0},
    },
    "heavy_tail": {
        "description": "power law (1 + |v|^2)^(-p) normalized to rho",
        "build": _heavy_tail_preset,
        "defaults": {"rho": 1.0, "p": 3.0},
    },
    "equilibrium": {
        "description": "self-consistent discrete equilibrium, uniform in x",
        "build": _equilibrium_preset,
        "defaults": {"rho": 1.0},
    },
    "tabulated": {
        "description": "values read from a snapshot file",
        "build": _tabulated_preset,
        "defaults": {},
    },
}


def build_datum(spec: DatumSpec, grid: PhaseGrid, **context) -> np.ndarray:
    """Sample a preset on the grid.

    Extra keyword context (epsilon, model, closure, unregularized_drift,
    snapshot) is forwarded to presets that need it.
    """
    entry = PRESETS.get(spec.kind)
    if entry is None:
        raise ScenarioError(f"unknown initial preset '{spec.kind}' (known: {', '.join(PRESETS)})", "initial.preset")
    unknown = set(spec.params) - set(entry["defaults"])
    if unknown:
        raise ScenarioError(f"unknown parameter(s) {sorted(unknown)} for preset '{spec.kind}'", "initial.params")
    params = dict(entry["defaults"])
    params.update(spec.params)
    f = np.array(entry["build"](grid, params, **context), dtype=float)
    validate_datum(f, grid)
    return f


def equilibrium_state(grid: PhaseGrid, epsilon: float, rho: float = 1.0, closure: str = "nonlinear",
                      unregularized_drift: bool = False) -> Tuple[np.ndarray, float]:
    """Uniform-in-x discrete equilibrium whose own regularized temperature reproduces itself.

    Solves T = T^eps[G_T] by bracketed root finding on [eps, 1/eps + eps + 1].

    Returns:
        (f, T) with f on the full grid
    """
    ones = np.ones(grid.spatial_shape)
    zero_u = np.zeros(grid.spatial_shape + (grid.dim,))
    densities = rho * ones

    def state_for(T: float) -> np.ndarray:
        coeffs = CollisionCoefficients(rate=ones, T=T * ones, u=zero_u, epsilon=epsilon,
                                       unregularized_drift=unregularized_drift)
        return discrete_equilibrium(coeffs, grid, densities)

    if closure in ("linear", "constant_temperature"):
        return state_for(1.0), 1.0

    def mismatch(T: float) -> float:
        f = state_for(T)
        macro = compute_moments(f, grid, rho_floor=0.0)
        return float(np.mean(regularize_fields(macro, epsilon).T_eps)) - T

    T_star = brentq(mismatch, epsilon, 1.0 / epsilon + epsilon + 1.0, xtol=1e-15, rtol=1e-15)
    logger.debug("self-consistent equilibrium temperature %.17g at eps=%g", T_star, epsilon)
    return state_for(T_star), float(T_star)


def validate_datum(f: np.ndarray, grid: PhaseGrid, key_path: str = "initial") -> None:
    """Reject data that are negative, non-finite or have non-finite mass, energy or entropy."""
    f = grid.check_field(f)
    if not np.all(np.isfinite(f)):
        raise ScenarioError("datum has non-finite values", key_path)
    if np.any(f < 0):
        raise ScenarioError("datum has negative values", key_path)
    mass = integrate_phase(f, grid)
    energy = integrate_phase(f, grid, 1.0 + grid.velocity_norm2())
    entropy = integrate_phase(np.abs(entropy_integrand(f)), grid)
    for name, value in (("mass", mass), ("energy", energy), ("entropy", entropy)):
        if not np.isfinite(value):
            raise ScenarioError(f"datum has infinite {name}", key_path)


def entropy_integrand(values: np.ndarray) -> np.ndarray:
    """f log f with entries at or below the floor counted as 0."""
    positive = values > ENTROPY_FLOOR
    return np.where(positive, values * np.log(np.where(positive, values, 1.0)), 0.0)


# =============================================================================
# TRUNCATION
# =============================================================================


def _truncate(values: np.ndarray, speed: np.ndarray, epsilon: float) -> np.ndarray:
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    cap = 1.0 / epsilon
    return np.minimum(np.where(speed <= cap, values, 0.0), cap)


def truncate_initial(f0: np.ndarray, grid: PhaseGrid, epsilon: float) -> np.ndarray:
    """min(1_{|v| <= 1/eps} f0, 1/eps) pointwise."""
    f0 = grid.check_field(f0)
    return _truncate(f0, grid.velocity_norm(), epsilon)


def truncate_boundary(g: np.ndarray, grid: PhaseGrid, epsilon: float) -> np.ndarray:
    """Same truncation for boundary samples of shape (transverse cells..., velocity cells...)."""
    g = np.asarray(g, dtype=float)
    return _truncate(g, grid.velocity_norm(), epsilon)


@dataclass
class ConvergenceReport:
    rows: List[Dict[str, float]]
    monotone: bool

    @property
    def flagged(self) -> bool:
        return not self.monotone


def convergence_report(
    values: np.ndarray,
    grid: PhaseGrid,
    epsilons: Sequence[float],
    measure: Union[float, np.ndarray, None] = None,
) -> ConvergenceReport:
    """Gaps between a datum and its truncations over a decreasing epsilon list.

    Args:
        values: Phase-space datum, or boundary samples with velocity axes last
        grid: Phase grid
        epsilons: Decreasing list of at least two values
        measure: Quadrature weights; defaults to the phase cell volume. For
            boundary data pass |n . v| d(sigma) dv^d.

    Returns:
        ConvergenceReport with L1, energy and entropy gaps and the cap-active fraction
    """
    if len(epsilons) < 2:
        raise ValueError("convergence report needs at least two epsilons")
    values = np.asarray(values, dtype=float)
    if measure is None:
        measure = grid.cell_volume
    speed = grid.velocity_norm()
    energy_weight = 1.0 + grid.velocity_norm2()
    entropy_ref = float(np.sum(entropy_integrand(values) * measure))
    positive = values > 0
    n_positive = max(int(np.sum(positive)), 1)

    rows = []
    for eps in epsilons:
        trunc = _truncate(values, speed, eps)
        gap = values - trunc
        rows.append({
            "epsilon": float(eps),
            "l1_gap": float(np.sum(np.abs(gap) * measure)),
            "energy_gap": float(np.sum(energy_weight * gap * measure)),
            "entropy_gap": abs(entropy_ref - float(np.sum(entropy_integrand(trunc) * measure))),
            "cap_active_fraction": float(np.sum(positive & (values > 1.0 / eps))) / n_positive,
        })
    l1 = [row["l1_gap"] for row in rows]
    monotone = all(b <= a for a, b in zip(l1, l1[1:]))
    if not monotone:
        logger.warning("truncation L1 gaps are not monotone over eps=%s; grid may not resolve the cap",
                       list(epsilons))
    return ConvergenceReport(rows=rows, monotone=monotone)
