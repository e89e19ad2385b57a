#!/usr/bin/env python3
"""
Test free transport, boundary conditions and trace bookkeeping
"""

import sys

import numpy as np
import pytest

from errors import BoundaryError, CFLError
from moments import maxwellian
from phase_grid import LOWER, classify_boundary, grid_1d, grid_from_sequence, integrate_phase
from transport_bc import (
    BoundaryCondition,
    BoundaryKind,
    TraceRecord,
    boundary_flux_integrals,
    check_cfl,
    make_inflow,
    reflect_velocity,
    transport_step,
)

DT = 0.01


def _state(grid, seed=4):
    rng = np.random.default_rng(seed)
    base = np.broadcast_to(maxwellian(1.0, [0.3] * grid.dim, 1.0, grid), grid.shape)
    return base * (0.5 + rng.random(grid.shape))


def _telescoped_mass(f, f_new, inc, grid):
    totals = inc.totals()
    return integrate_phase(f_new, grid) + totals["mass_out"] - totals["mass_in"] - integrate_phase(f, grid)


def test_reflect_velocity():
    np.testing.assert_array_equal(reflect_velocity([3.0, 4.0], [1.0, 0.0]), [-3.0, 4.0])
    n = np.array([0.6, 0.8])
    v = np.array([1.5, -2.0])
    np.testing.assert_allclose(reflect_velocity(reflect_velocity(v, n), n), v, atol=1e-15)
    assert np.linalg.norm(reflect_velocity(v, n)) == pytest.approx(np.linalg.norm(v))
    with pytest.raises(BoundaryError):
        reflect_velocity([1.0, 0.0], [2.0, 0.0])


def test_full_reflection_rejected():
    with pytest.raises(BoundaryError):
        BoundaryCondition(kind="reflection", theta=1.0)
    with pytest.raises(BoundaryError):
        BoundaryCondition(kind="reflection", theta=-0.1)
    assert BoundaryCondition(kind="periodic").kind == BoundaryKind.PERIODIC


def test_cfl_violation():
    grid = grid_1d(nx=16, nv=16, vmax=4.0)
    assert check_cfl(grid, DT) < 1.0
    with pytest.raises(CFLError):
        transport_step(_state(grid), BoundaryCondition(), 0.0, 0.1, grid)


def test_inflow_mass_telescopes():
    grid = grid_1d(nx=16, nv=16, vmax=4.0)
    bc = BoundaryCondition(inflow=make_inflow("maxwellian", grid, {"rho": 0.5, "T": 0.8}))
    f = _state(grid)
    for order in (1, 2):
        f_new, inc = transport_step(f, bc, 0.0, DT, grid, order=order)
        assert abs(_telescoped_mass(f, f_new, inc, grid)) <= 1e-13 * integrate_phase(f, grid)
        assert inc.totals()["mass_in"] > 0 and inc.totals()["mass_out"] > 0


def test_zero_reflection_matches_zero_inflow():
    grid = grid_1d(nx=12, nv=16, vmax=4.0)
    f = _state(grid)
    a, inc_a = transport_step(f, BoundaryCondition(kind="reflection", theta=0.0), 0.0, DT, grid)
    b, inc_b = transport_step(f, BoundaryCondition(kind="inflow"), 0.0, DT, grid)
    assert np.array_equal(a, b)
    assert inc_a.totals() == inc_b.totals()
    assert inc_b.totals()["mass_in"] == 0.0


def test_reflection_pairs_mirrored_cells():
    grid = grid_1d(nx=12, nv=16, vmax=4.0)
    f = _state(grid)
    bc = BoundaryCondition(kind="reflection", theta=0.5)
    f_new, inc = transport_step(f, bc, 0.0, DT, grid, keep_values=True)
    for key, trace in inc.values.items():
        np.testing.assert_array_equal(trace["incoming"], 0.5 * np.flip(trace["outgoing"], axis=-1))
    np.testing.assert_allclose(inc.mass_in, 0.5 * inc.mass_out, rtol=1e-13)
    np.testing.assert_allclose(inc.v2_in, 0.5 * inc.v2_out, rtol=1e-13)
    assert abs(_telescoped_mass(f, f_new, inc, grid)) <= 1e-13 * integrate_phase(f, grid)


def test_periodic_conserves_mass():
    grid = grid_from_sequence(2, [0, 0], [1, 1], [8, 8], 3.0, [6, 6])
    f = _state(grid)
    dt = 0.5 / (2.5 * 8 * 2)
    f_new, inc = transport_step(f, BoundaryCondition(kind="periodic"), 0.0, dt, grid, muscl=True)
    assert integrate_phase(f_new, grid) == pytest.approx(integrate_phase(f, grid), rel=1e-13)
    assert all(v == 0.0 for v in inc.totals().values())


def test_trace_record_accumulates():
    grid = grid_1d(nx=12, nv=16, vmax=4.0)
    faces = classify_boundary(grid)
    record = TraceRecord(faces)
    assert boundary_flux_integrals(record, "mass") == (0.0, 0.0)
    assert boundary_flux_integrals(record, "1+|v|^2") == (0.0, 0.0)
    with pytest.raises(ValueError):
        boundary_flux_integrals(record, "momentum")
    bc = BoundaryCondition(inflow=make_inflow("maxwellian", grid))
    f = _state(grid)
    for k in range(3):
        f, inc = transport_step(f, bc, k * DT, DT, grid, faces=faces)
        record.add(inc)
    mass_in, mass_out = boundary_flux_integrals(record, "mass")
    energy_in, energy_out = boundary_flux_integrals(record, "energy")
    assert energy_in >= mass_in > 0 and energy_out >= mass_out > 0
    assert len(record.history) == 3
    assert record.corner_totals() == (0.0, 0.0)


def test_inflow_presets():
    grid = grid_1d(nx=4, nv=16, vmax=4.0)
    snapshot = _state(grid)
    datum = make_inflow("tabulated", grid, snapshot=snapshot)
    np.testing.assert_array_equal(datum.values(0.0, 0, LOWER, grid), snapshot[0])
    with pytest.raises(BoundaryError):
        make_inflow("tabulated", grid)
    with pytest.raises(BoundaryError):
        make_inflow("swirl", grid)
    with pytest.raises(BoundaryError):
        make_inflow("tabulated", grid, snapshot=-snapshot)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
