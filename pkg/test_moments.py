#!/usr/bin/env python3
"""
Test moments, renormalizations and the regularized fields
"""

import sys

import numpy as np
import pytest

from errors import SolverError
from moments import (
    MacroFields,
    compute_moments,
    div_renorm_v,
    maxwellian,
    regularize_fields,
    renorm_scalar,
    renorm_vector,
    variance_direct,
)
from phase_grid import grid_1d, grid_from_sequence


def _macro(rho, j, V):
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    j = np.asarray(j, dtype=float).reshape(rho.shape + (-1,))
    V = np.atleast_1d(np.asarray(V, dtype=float))
    vacuum = rho <= 0.0
    return MacroFields(rho=rho, j=j, e2=np.zeros_like(rho), u=np.zeros_like(j), V=V,
                       T=np.zeros_like(rho), vacuum=vacuum, rho_floor=0.0)


def test_renorm_scalar_values():
    assert renorm_scalar(0.0, 1.0, 1.0) == 0.0
    assert renorm_scalar(1.0, 1.0, 1.0) == pytest.approx(1.0 / 3.0)
    assert renorm_scalar(1e12, 1.0, 0.5) == pytest.approx(2.0, rel=1e-9)
    with pytest.raises(ValueError):
        renorm_scalar(-1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        renorm_scalar(1.0, 1.0, 0.0)


def test_renorm_scalar_bound_and_monotone():
    rng = np.random.default_rng(7)
    r = np.sort(rng.exponential(5.0, 500))
    for eps in (1.0, 0.3, 0.05):
        out = renorm_scalar(r, 1.0, eps)
        assert np.all(out <= np.minimum(1.0 / eps, r) + 1e-15)
        assert np.all(np.diff(out) >= 0)


def test_renorm_vector_values():
    np.testing.assert_array_equal(renorm_vector(np.zeros(2), 1.0, 0.5), np.zeros(2))
    out = renorm_vector(np.array([3.0, 4.0]), 1.0, 0.5)
    np.testing.assert_allclose(out, [0.75, 1.0])
    assert np.linalg.norm(out) <= min(2.0, 5.0)
    np.testing.assert_allclose(renorm_vector(np.array([1.0, 0.0]), 1.0, 0.0), [1.0, 0.0])
    with pytest.raises(ValueError):
        renorm_vector(np.array([np.inf, 0.0]), 1.0, 0.5)


def test_div_renorm_v():
    assert div_renorm_v(np.array([0.0]), 1.0) == pytest.approx(0.5)
    assert div_renorm_v(np.array([1.0, 0.0]), 1.0) == pytest.approx(5.0 / 9.0)
    assert div_renorm_v(np.array([2.0, -1.0]), 0.0) == pytest.approx(2.0)
    v = np.random.default_rng(1).normal(size=(200, 2)) * 10
    assert np.all(div_renorm_v(v, 0.2) <= 2.0)


def test_vacuum_moments():
    grid = grid_1d(nx=3, nv=16)
    m = compute_moments(np.zeros(grid.shape), grid)
    assert np.all(m.rho == 0) and np.all(m.u == 0) and np.all(m.T == 0)
    assert np.all(m.vacuum)


def test_maxwellian_round_trip():
    grid = grid_1d(nx=2, nv=256, vmax=8.0)
    f = np.broadcast_to(maxwellian(2.0, [1.0], 0.5, grid), grid.shape)
    m = compute_moments(f, grid)
    np.testing.assert_allclose(m.rho, 2.0, atol=1e-6)
    np.testing.assert_allclose(m.u[..., 0], 1.0, atol=1e-6)
    np.testing.assert_allclose(m.T, 0.5, atol=1e-6)


def test_mixed_vacuum_and_maxwellian_cells():
    grid = grid_1d(nx=2, nv=128, vmax=8.0)
    f = np.zeros(grid.shape)
    f[1] = maxwellian(1.0, [0.0], 1.0, grid)
    m = compute_moments(f, grid)
    assert m.vacuum[0] and not m.vacuum[1]
    assert (m.rho[0], m.u[0, 0], m.T[0]) == (0.0, 0.0, 0.0)
    assert m.T[1] == pytest.approx(1.0, abs=1e-6)


def test_point_mass_has_zero_variance():
    grid = grid_1d(nx=2, nv=16, vmax=4.0)
    f = np.zeros(grid.shape)
    f[:, 11] = 3.0
    m = compute_moments(f, grid)
    v0 = grid.v[0][11]
    np.testing.assert_allclose(m.e2, m.rho * v0 ** 2)
    np.testing.assert_allclose(m.j[..., 0], m.rho * v0)
    assert np.all(m.V <= 1e-12 * m.e2)


def test_negative_state_rejected():
    grid = grid_1d(nx=2, nv=8)
    f = np.ones(grid.shape)
    f[0, 0] = -1e-6
    with pytest.raises(SolverError):
        compute_moments(f, grid)


def test_regularize_vacuum_and_formula():
    reg = regularize_fields(_macro(0.0, 0.0, 0.0), 0.1)
    assert reg.T_eps[0] == pytest.approx(0.1)
    assert reg.u_eps[0, 0] == 0.0
    reg = regularize_fields(_macro(2.0, 2.0, 1.0), 0.5)
    assert reg.T_eps[0] == pytest.approx(5.0 / 6.0)
    assert reg.u_eps[0, 0] == pytest.approx(4.0 / 7.0)
    assert reg.T_eps[0] <= 1.0
    reg = regularize_fields(_macro(1.0, 0.0, 1e6), 0.5)
    assert reg.T_eps[0] <= 2.5
    with pytest.raises(ValueError):
        regularize_fields(_macro(1.0, 0.0, 1.0), 0.0)


def test_regularized_bounds_on_adversarial_fields():
    rng = np.random.default_rng(11)
    rho = rng.exponential(1e3, 300)
    j = rng.normal(scale=1e4, size=(300, 2))
    V = rng.exponential(1e5, 300)
    m = MacroFields(rho=rho, j=j, e2=np.zeros(300), u=np.zeros_like(j), V=V, T=V / rho,
                    vacuum=np.zeros(300, dtype=bool), rho_floor=0.0)
    for eps in (1.0, 0.1, 0.01):
        reg = regularize_fields(m, eps)
        assert np.all(reg.T_eps >= eps)
        assert np.all(reg.T_eps <= 1.0 / eps + eps + 1e-12)
        assert np.all(np.linalg.norm(reg.u_eps, axis=-1) <= 1.0 / eps + 1e-12)


def test_maxwellian_values():
    grid = grid_1d(nx=2, nv=256, vmax=8.0)
    assert np.all(maxwellian(0.0, [0.0], 0.0, grid) == 0)
    grid_odd = grid_1d(nx=2, nv=17, vmax=8.5)
    M = maxwellian(1.0, [0.0], 1.0, grid_odd)
    assert M[8] == pytest.approx(1.0 / np.sqrt(2 * np.pi), rel=1e-12)
    assert np.sum(maxwellian(1.0, [0.0], 1.0, grid)) * grid.dv[0] == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        maxwellian(1.0, [0.0], 0.0, grid)


def test_direct_variance_agrees_two_dimensional():
    grid = grid_from_sequence(2, [0, 0], [1, 1], [2, 2], 6.0, [48, 48])
    f = np.broadcast_to(maxwellian(1.5, [0.5, -0.25], 0.8, grid), grid.shape)
    m = compute_moments(f, grid)
    np.testing.assert_allclose(variance_direct(f, m, grid), m.V, rtol=1e-12)
    assert np.all(m.rho * np.sum(m.u ** 2, axis=-1) <= m.e2)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
