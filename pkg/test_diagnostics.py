#!/usr/bin/env python3
"""
Test integrals, dissipation functionals, pointwise audits and the balance ledger
"""

import sys

import numpy as np
import pytest

from collision import build_collision_model, collision_coefficients, collision_dissipation
from diagnostics import (
    AUDIT_NAMES,
    AuditInputs,
    BalanceLedger,
    dissipation_functional,
    energy_slack,
    entropy_and_energy,
    entropy_slack,
    evaluate_verdicts,
    jensen_check,
    mollification_probe,
    mollifier,
    monotone_violation,
    reflection_flux_defect,
    renorm_source,
    third_moment,
    third_moment_series,
    total_entropy,
    variance_identity_check,
    weighted_fisher,
)
from integrator import Tolerances
from moments import RegularizedFields, compute_moments, maxwellian, regularize_fields
from phase_grid import grid_1d, grid_from_sequence
from transport_bc import TraceIncrement


def _standard(nv=1024, vmax=10.0, nx=2):
    grid = grid_1d(nx=nx, nv=nv, vmax=vmax)
    f = np.broadcast_to(maxwellian(1.0, [0.0], 1.0, grid), grid.shape).copy()
    return grid, f


def _evaluate(ledger):
    return evaluate_verdicts(ledger, AuditInputs(), Tolerances())


def _increment(mass_in, mass_out, v2_in=0.0, v2_out=0.0):
    arr = np.atleast_1d
    return TraceIncrement(t=0.0, dt=0.1, mass_in=arr(mass_in), mass_out=arr(mass_out), v2_in=arr(v2_in),
                          v2_out=arr(v2_out), entropy_in=arr(0.0), entropy_out=arr(0.0))


def test_fisher_information_of_maxwellian():
    grid, f = _standard()
    assert weighted_fisher(f, grid) == pytest.approx(0.25, abs=1e-4)
    assert weighted_fisher(f, grid, np.full(2, 2.0)) == pytest.approx(0.5, abs=2e-4)


def test_third_moment_of_maxwellian():
    grid, f = _standard()
    expected = 2.0 * np.sqrt(2.0 / np.pi)
    assert third_moment(f, grid) == pytest.approx(expected, abs=1e-4)
    times, values, integral = third_moment_series([(0.0, f), (0.5, f), (1.0, f)], grid)
    assert integral == pytest.approx(values[0])
    with pytest.raises(ValueError):
        third_moment_series([], grid)


def test_entropy_of_maxwellian():
    grid, f = _standard()
    assert total_entropy(f, grid) == pytest.approx(-0.5 * (1.0 + np.log(2.0 * np.pi)), abs=1e-6)


def test_total_variation_term_of_mollification_chain():
    grid, f = _standard()
    probe = mollification_probe(f, grid, delta=0.2)
    np.testing.assert_allclose(probe.mid / 0.2, np.sqrt(2.0 / np.pi), atol=1e-4)
    np.testing.assert_allclose(probe.rhs / 0.2, 1.0, atol=1e-3)
    assert probe.passed
    assert probe.lhs_over_mid <= 1.0 and probe.mid_over_rhs <= 1.0


def test_mollification_of_constant_state():
    grid = grid_1d(nx=2, nv=64, vmax=4.0)
    probe = mollification_probe(np.ones(grid.shape), grid, delta=0.5)
    assert np.all(probe.lhs <= 1e-12)
    assert np.all(probe.mid == 0.0)


def test_mollifier_kernel():
    grid = grid_1d(nx=2, nv=64, vmax=4.0)
    kernel = mollifier(grid, 0.5)
    assert kernel.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(kernel, kernel[::-1])
    with pytest.raises(ValueError):
        mollifier(grid, 0.1)
    grid2 = grid_from_sequence(2, [0, 0], [1, 1], [2, 2], 4.0, [16, 16])
    assert mollifier(grid2, 1.0).shape == (5, 5)


def test_dissipation_with_shifted_drift():
    grid, f = _standard(nv=512, vmax=8.0)
    macro = compute_moments(f, grid)
    model = build_collision_model("constant")
    exact = dissipation_functional(f, grid, macro, model)
    assert exact.value == pytest.approx(0.0, abs=1e-4)
    shifted = RegularizedFields(T_eps=np.ones(2), u_eps=np.ones((2, 1)), epsilon=0.0)
    value = dissipation_functional(f, grid, macro, model, shifted)
    assert value.value == pytest.approx(1.0, rel=1e-3)
    assert value.skipped == 0


def test_dissipation_skips_vacuum():
    grid = grid_1d(nx=2, nv=64, vmax=6.0)
    f = np.zeros(grid.shape)
    f[1] = maxwellian(1.0, [0.0], 1.0, grid)
    macro = compute_moments(f, grid)
    value = dissipation_functional(f, grid, macro, build_collision_model("constant"))
    assert value.skipped >= 64
    assert np.isfinite(value.value)


def test_renorm_source_without_regularization():
    grid, f = _standard(nv=256, vmax=8.0)
    assert renorm_source(f, grid, np.ones(2), 0.0) == pytest.approx(1.0, abs=1e-6)
    assert renorm_source(f, grid, np.ones(2), 0.5) < 1.0


def test_pointwise_audits():
    grid, f = _standard(nv=256, vmax=8.0)
    macro = compute_moments(f, grid)
    assert jensen_check(macro) < 0
    assert variance_identity_check(macro, f, grid) <= 1e-12
    point = np.zeros(grid.shape)
    point[:, 200] = 2.0
    pm = compute_moments(point, grid)
    assert variance_identity_check(pm) <= 1e-12
    assert variance_identity_check(pm, point, grid) <= 1e-12
    assert jensen_check(pm) <= 1e-12


def test_reflection_flux_defect():
    assert reflection_flux_defect(_increment(0.5, 1.0, 1.0, 2.0), 0.5) == 0.0
    assert reflection_flux_defect(_increment(0.6, 1.0, 1.0, 2.0), 0.5) == pytest.approx(0.1)
    assert reflection_flux_defect(_increment(0.0, 0.0), 0.5) == 0.0


def test_slacks_and_monotone_violation():
    assert energy_slack(2.0, 2.5, 0.25, 0.5) == pytest.approx(-0.75)
    assert entropy_slack(1.0, 1.0, 0.2, 0.1, 0.3, 0.05) == pytest.approx(0.35)
    rows = [{"D_cum": 0.0}, {"D_cum": 1.0}, {"D_cum": 0.5}]
    assert monotone_violation(rows, ("D_cum",)) == pytest.approx(0.5)
    assert monotone_violation(rows[:2], ("D_cum",)) == 0.0


def test_dissipation_functional_is_the_collision_face_form():
    grid = grid_1d(nx=2, nv=64, vmax=6.0)
    rng = np.random.default_rng(4)
    f = np.broadcast_to(maxwellian(1.0, [0.4], 0.6, grid), grid.shape) * (1.0 + 0.3 * rng.random(grid.shape))
    macro = compute_moments(f, grid)
    model = build_collision_model("constant")
    reg = regularize_fields(macro, 0.1)
    coeffs = collision_coefficients(macro, reg, model)
    value = dissipation_functional(f, grid, macro, model, reg)
    expected = float(np.sum(collision_dissipation(f, grid, coeffs))) * grid.dx_volume
    assert value.value == pytest.approx(expected, rel=1e-12)
    assert value.value > 0.0 and value.skipped == 0


def test_energy_verdict_compares_against_collision_work():
    grid, f = _standard(nv=128, vmax=8.0)
    warmer = 1.01 * f
    gain = 0.01 * BalanceLedger.start(f, grid).energy0

    ledger = BalanceLedger.start(f, grid)
    ledger.snapshot(0.0, f)
    ledger.work_cum, ledger.work_scale_cum = gain, 4.0 * gain
    ledger.snapshot(0.1, warmer)
    verdicts = {v.name: v for v in _evaluate(ledger)}
    assert verdicts["energy_inequality"].passed
    assert ledger.rows[-1]["energy_slack"] == pytest.approx(gain)

    unexplained = BalanceLedger.start(f, grid)
    unexplained.snapshot(0.0, f)
    unexplained.work_scale_cum = 4.0 * gain
    unexplained.snapshot(0.1, warmer)
    verdicts = {v.name: v for v in _evaluate(unexplained)}
    assert not verdicts["energy_inequality"].passed
    assert verdicts["energy_inequality"].slack == pytest.approx(gain)


def test_static_ledger_passes_every_audit():
    grid, f = _standard(nv=128, vmax=8.0)
    ledger = BalanceLedger.start(f, grid)
    row = ledger.snapshot(0.0, f)
    assert row["energy_slack"] == 0.0 and row["entropy_slack"] == 0.0
    verdicts = _evaluate(ledger)
    assert tuple(v.name for v in verdicts) == AUDIT_NAMES
    assert len(AUDIT_NAMES) == 11
    assert all(v.passed for v in verdicts)
    assert verdicts[5].detail == "not applicable"


def test_pending_fluxes_fold_into_the_row():
    grid, f = _standard(nv=128, vmax=8.0)
    ledger = BalanceLedger.start(f, grid)
    entropy_and_energy(f, 0.0, ledger)
    entropy_and_energy(f, 0.1, ledger, [_increment(0.2, 0.5, 1.0, 3.0), _increment(0.1, 0.0)])
    row = ledger.rows[-1]
    assert row["influx_mass"] == pytest.approx(0.3)
    assert row["outflux_mass"] == pytest.approx(0.5)
    assert row["influx_energy"] == pytest.approx(1.3)
    assert row["outflux_energy"] == pytest.approx(3.5)
    assert row["energy_slack"] == pytest.approx(3.5 - 1.3)
    assert len(ledger.rows) == 2


def test_ledger_records_a_step():
    grid, f = _standard(nv=128, vmax=8.0)
    ledger = BalanceLedger.start(f, grid)
    ledger.snapshot(0.0, f)
    inc = _increment(0.0, 0.0)
    defect = ledger.record_step(f, 0.5 * f, [inc], dt=0.1, fisher=0.25, source=1.0, functional=0.0,
                                picard_iterations=3, picard_change=1e-10, flagged=True)
    assert defect == pytest.approx(0.5)
    assert ledger.fisher_cum == pytest.approx(0.025)
    ledger.snapshot(0.1, 0.5 * f)
    verdicts = {v.name: v for v in _evaluate(ledger)}
    assert not verdicts["mass_ledger"].passed
    assert not verdicts["picard_convergence"].passed
    assert ledger.rows[-1]["picard_iters"] == 3.0


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
