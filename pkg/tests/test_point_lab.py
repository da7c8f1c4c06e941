"""Material-point experiments and the scalar reference evolution.

Reference values below were produced by ``oracle_trace`` (bisection on the
switching condition, 20 substeps per load step) before the Newton solver
was compared against them, and are frozen here.
"""

import csv

import numpy as np
import pytest

from ferrovi.constitutive import Law, patch_test_params
from ferrovi.point_lab import (
    CURVE_COLUMNS,
    PointExperiment,
    ScalarOracle,
    curve_table,
    depolarization,
    oracle_trace,
    poling_cycle,
    run_point,
    virgin_ramp,
    write_curve_csv,
)
from ferrovi.vi_core import LoadStep, Schedule

E0 = 1e6
RAMP = np.linspace(0.0, 2.0 * E0, 21)[1:]

# p after ramping the axial field to 2 E0 in 20 steps (C/m²)
FROZEN_RAMP_END = {
    ("quadratic", False): 1.5000000000000087,
    ("quadratic", True): 2.5298391281785975,
    ("saturating", False): 0.2853747659175374,
    ("saturating", True): 0.2864044894561454,
}


def _params(law, coupled):
    if coupled:
        return patch_test_params(law)
    return patch_test_params(law, remanent_strain=False, d31=0.0, d33=0.0)


@pytest.mark.parametrize("law,coupled", list(FROZEN_RAMP_END))
def test_oracle_ramp_values_are_frozen(law, coupled):
    p = oracle_trace(_params(law, coupled), RAMP)
    assert p[-1] == pytest.approx(FROZEN_RAMP_END[(law, coupled)], rel=1e-10)
    assert np.all(p[:10] == 0.0)  # |e| <= E0 up to step 10


def test_oracle_stays_inside_switching_surface():
    for law in Law:
        prm = patch_test_params(law)
        oracle = ScalarOracle(prm)
        p = 0.0
        fields = np.concatenate([np.linspace(0, 1.5, 31), np.linspace(1.5, -1.5, 61), np.linspace(-1.5, 1.5, 61)]) * E0
        for e in fields:
            p = oracle.update(e, p)
            assert abs(oracle.driving_force(e, p)) <= E0 * (1 + 1e-10)


def test_oracle_zero_below_coercive_field():
    prm = patch_test_params()
    assert not oracle_trace(prm, [0.5 * E0, -0.99 * E0, 0.7 * E0]).any()


def test_quadratic_closed_form():
    """Hardening balance e + κ p e² - 2 H0 p = E0."""
    prm = _params("quadratic", True)
    kappa = ScalarOracle(prm).kappa
    e = 2.0 * E0
    assert (e - E0) / (2 * prm.H0 - kappa * e * e) == pytest.approx(FROZEN_RAMP_END[("quadratic", True)], rel=1e-10)
    prm = _params("quadratic", False)
    assert E0 / (2 * prm.H0) == pytest.approx(FROZEN_RAMP_END[("quadratic", False)], rel=1e-10)


def test_saturating_m2_closed_form():
    """H0 P0² p / (P0² - p²) = e - E0 is a quadratic in p."""
    prm = _params("saturating", False)
    a = 2.0 * E0 - E0
    P0, H0 = prm.P0, prm.H0
    p = (-H0 * P0**2 + np.sqrt(H0**2 * P0**4 + 4 * a * a * P0**2)) / (2 * a)
    assert p == pytest.approx(FROZEN_RAMP_END[("saturating", False)], rel=1e-10)


def test_pole_and_release_quadratic():
    prm = _params("quadratic", False)
    p = oracle_trace(prm, [1.5 * E0, 0.0])
    # hardening force 2 H0 p balances the excess field 0.5 E0
    assert p[-1] == pytest.approx(0.25 * E0 / prm.H0, rel=1e-10)
    run = run_point(PointExperiment(prm, Schedule.ramps([(15, {"E3": 1.5 * E0}), (15, {"E3": 0.0})])))
    assert run.table["P3"][-1] == pytest.approx(p[-1], abs=5 * prm.reg_eps)


@pytest.mark.parametrize("law", list(Law))
def test_solver_follows_oracle_on_ramp(law):
    prm = patch_test_params(law)
    sched = Schedule(tuple(LoadStep(float(i + 1), {"E3": e}) for i, e in enumerate(RAMP)))
    run = run_point(PointExperiment(prm, sched))
    ref = oracle_trace(prm, RAMP)
    assert np.abs(run.table["P3"][1:] - ref).max() <= max(5 * prm.reg_eps, 1e-3 * prm.P0)


def test_equilibrium_at_every_step():
    prm = patch_test_params()
    run = run_point(PointExperiment(prm, depolarization(prm, pole_steps=5, stress_steps=5)))
    from ferrovi import constitutive as c
    for w, step in zip(run.physical_states()[1:], depolarization(prm, pole_steps=5, stress_steps=5)):
        _, g = c.energy_derivatives(w, prm, 3, order=1)
        np.testing.assert_allclose(g[2], step.data["T33"], atol=1e-5 * 200e6)
        np.testing.assert_allclose(g[:2], 0.0, atol=1e-5 * 200e6)
        np.testing.assert_allclose(g[8], step.data["E3"], atol=1e-5 * E0)


def test_zero_schedule_is_virgin():
    prm = patch_test_params()
    sched = Schedule.ramps([(5, {"E3": 0.0, "T33": 0.0})])
    run = run_point(PointExperiment(prm, sched))
    for col in CURVE_COLUMNS[2:]:
        assert not run.table[col].any()


def test_butterfly_symmetry():
    prm = patch_test_params(Law.SATURATING)
    q = 12
    run = run_point(PointExperiment(prm, poling_cycle(prm, 1.5, 5 * q)))
    S, E = run.table["S33"], run.table["E3"]
    down = np.arange(q, 3 * q + 1)  # +A -> -A
    up = down + 2 * q  # -A -> +A
    np.testing.assert_allclose(E[up], -E[down], atol=1e-6)
    assert np.abs(S[down] - S[up]).max() <= 1e-3 * prm.S0
    # the strain really is a butterfly: lowest near the coercive field, highest at the turning points
    assert S[down].min() < S[q] - 0.5 * prm.S0


def test_saturation_bound_over_cycle():
    prm = patch_test_params(Law.SATURATING)
    run = run_point(PointExperiment(prm, poling_cycle(prm, 1.5, 60)))
    absP, E = run.table["absP"], run.table["E3"]
    assert absP.max() < prm.P0
    assert np.all(absP[np.isclose(np.abs(E), 1.5 * E0)] >= 0.9 * prm.P0)


def test_depolarization_is_monotone():
    prm = patch_test_params()
    run = run_point(PointExperiment(prm, depolarization(prm)))
    absP = run.table["absP"][30:]
    assert np.all(np.diff(absP) <= 1e-12 * prm.P0)
    assert absP[-1] < absP[0]


def test_curve_csv_header(tmp_path):
    prm = patch_test_params()
    run = run_point(PointExperiment(prm, virgin_ramp(prm, 1.0, 3)))
    path = tmp_path / "curve.csv"
    write_curve_csv(path, run.table)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["step", "t", "E3", "T33", "D3", "P3", "S33", "absP"]
    assert len(rows) == 5
    assert float(rows[-1][2]) == pytest.approx(E0)


def test_two_dimensional_point():
    prm = patch_test_params(Law.QUADRATIC)
    sched = Schedule(tuple(LoadStep(float(i + 1), {"E3": e}) for i, e in enumerate(RAMP)))
    run = run_point(PointExperiment(prm, sched, dim=2))
    assert run.table["P3"][-1] > 0
    assert curve_table(run.problem, run.trajectory)["step"][-1] == 20
