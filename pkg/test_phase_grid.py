#!/usr/bin/env python3
"""
Test phase grids, quadrature and boundary classification
"""

import sys

import numpy as np
import pytest

from errors import GridError
from moments import maxwellian
from phase_grid import (
    LOWER,
    UPPER,
    GridSpec,
    build_grid,
    classify_boundary,
    grid_1d,
    grid_from_sequence,
    integrate_phase,
    truncation_fraction,
)


def test_uniform_grid_arithmetic():
    grid = grid_1d(nx=4, nv=4, vmax=2.0)
    assert grid.dx == (0.25,)
    assert grid.dv == (1.0,)
    np.testing.assert_allclose(grid.x[0], [0.125, 0.375, 0.625, 0.875])
    np.testing.assert_allclose(grid.v[0], [-1.5, -0.5, 0.5, 1.5])


def test_velocity_centers_are_mirror_symmetric():
    grid = grid_1d(nx=4, nv=10, vmax=3.0)
    v = grid.v[0]
    assert np.array_equal(v, -v[::-1])


def test_cell_count_below_minimum():
    with pytest.raises(GridError, match="cell count below minimum"):
        grid_1d(nx=1, nv=8)
    with pytest.raises(GridError):
        build_grid(GridSpec(dim=3, lower=(0,) * 3, upper=(1,) * 3, nx=(2,) * 3, nv=(2,) * 3))
    with pytest.raises(GridError):
        build_grid(GridSpec(dim=1, lower=(1.0,), upper=(0.0,), nx=(4,), nv=(4,)))
    with pytest.raises(GridError):
        build_grid(GridSpec(dim=1, nx=(4,), nv=(4,), vmax=-1.0))


def test_two_dimensional_cell_count():
    grid = grid_from_sequence(2, [0, 0], [1, 1], [8, 8], 4.0, [16, 16])
    assert grid.shape == (8, 8, 16, 16)
    assert int(np.prod(grid.shape)) == 16384
    total = grid.cell_volume * np.prod(grid.shape)
    assert total == pytest.approx(grid.phase_volume)
    assert grid.phase_volume == pytest.approx(64.0)


def test_integrate_constant():
    grid = grid_1d(nx=8, nv=16, vmax=2.0)
    assert integrate_phase(np.ones(grid.shape), grid) == pytest.approx(4.0, rel=1e-14)


def test_integrate_maxwellian_moments():
    grid = grid_1d(nx=4, nv=256, vmax=8.0)
    f = np.broadcast_to(maxwellian(1.0, [0.0], 1.0, grid), grid.shape)
    assert integrate_phase(f, grid) == pytest.approx(1.0, abs=1e-6)
    assert integrate_phase(f, grid, grid.velocity_norm2()) == pytest.approx(1.0, abs=1e-6)
    by_callable = integrate_phase(f, grid, lambda xs, vs: vs[0] ** 2)
    assert by_callable == pytest.approx(1.0, abs=1e-6)


def test_integrate_shape_mismatch():
    grid = grid_1d(nx=4, nv=8)
    with pytest.raises(GridError):
        integrate_phase(np.ones((4, 9)), grid)


def test_integrate_is_linear_and_monotone():
    grid = grid_1d(nx=6, nv=12)
    rng = np.random.default_rng(3)
    f = rng.random(grid.shape)
    g = f + rng.random(grid.shape)
    w = grid.velocity_norm2()
    assert integrate_phase(g, grid, w) >= integrate_phase(f, grid, w)
    assert integrate_phase(2 * f + g, grid) == pytest.approx(2 * integrate_phase(f, grid) + integrate_phase(g, grid))


def test_quadrature_refinement_order():
    errors = []
    for nv in (16, 32):
        grid = grid_1d(nx=2, nv=nv, vmax=8.0)
        f = np.broadcast_to(maxwellian(1.0, [0.3], 1.0, grid), grid.shape)
        errors.append(abs(integrate_phase(f, grid) / grid.spatial_volume - 1.0))
    assert errors[1] <= errors[0] / 2.0 or errors[1] < 1e-14


def test_classify_one_dimensional():
    grid = grid_1d(nx=4, nv=4, vmax=2.0)
    faces = classify_boundary(grid)
    assert len(faces) == 2
    left, right = faces
    assert left.side == LOWER and left.normal == (-1.0,) and left.location == (0.0,)
    assert right.side == UPPER and right.normal == (1.0,)
    np.testing.assert_array_equal(left.incoming, grid.v[0] > 0)
    # v = -0.5 enters through x = 1
    k = int(np.argmin(np.abs(grid.v[0] + 0.5)))
    assert right.incoming[k]
    for face in faces:
        assert sum(face.counts()) == grid.spec.nv[0]


def test_classify_two_dimensional():
    grid = grid_from_sequence(2, [0, 0], [1, 1], [3, 3], 4.0, [8, 8])
    faces = classify_boundary(grid)
    assert len(faces) == 4 * 3
    assert [f.face_id for f in faces] == list(range(12))
    face = next(f for f in faces if f.normal == (1.0, 0.0))
    i = int(np.argmin(np.abs(grid.v[0] + 1.0)))
    j = int(np.argmin(np.abs(grid.v[1] - 3.0)))
    assert face.incoming[i, j]
    assert sum(f.corner for f in faces) == 8
    for f in faces:
        assert np.linalg.norm(f.normal) == 1.0
        assert sum(f.counts()) == 64


def test_grazing_cells_on_odd_grid():
    grid = grid_1d(nx=2, nv=5, vmax=2.5)
    face = classify_boundary(grid)[0]
    assert face.counts() == (2, 2, 1)


def test_truncation_fraction():
    grid = grid_1d(nx=2, nv=20, vmax=10.0)
    f = np.zeros(grid.shape)
    f[:, 0] = 1.0
    f[:, 10] = 1.0
    assert truncation_fraction(f, grid) == pytest.approx(0.5)
    assert truncation_fraction(np.zeros(grid.shape), grid) == 0.0


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
