import numpy as np
import pytest
import scipy.sparse as sp

from ferrovi import constitutive as c
from ferrovi.constitutive import Law, patch_test_params
from ferrovi.errors import NoConvergence, SaturationReached, SingularSystem
from ferrovi.point_lab import PointProblem, virgin_ramp
from ferrovi.vi_core import (
    LoadStep,
    Schedule,
    damped_update,
    newton_direction,
    run_schedule,
    solve_step,
)


def test_identity_newton_step_is_negative_residual():
    r = np.array([1.0, -2.0, 3.0])
    step, mult = newton_direction(np.eye(3), r)
    np.testing.assert_allclose(step, -r)
    assert mult is None


def test_spd_two_by_two():
    step, _ = newton_direction(np.diag([2.0, 4.0]), -np.array([2.0, 4.0]))
    np.testing.assert_allclose(step, [1.0, 1.0])


def test_constrained_step_solves_kkt(rng):
    n = 12
    a = rng.normal(size=(n, n))
    H = a @ a.T + n * np.eye(n)
    B = sp.csr_matrix(rng.normal(size=(2, n)))
    r = rng.normal(size=n)
    step, lam = newton_direction(sp.csr_matrix(H), r, B)
    kkt = np.concatenate([H @ step + B.T @ lam + r, B @ step])
    assert np.linalg.norm(kkt) <= 1e-10 * np.linalg.norm(r)


def test_singular_system_is_reported():
    with pytest.raises(SingularSystem):
        newton_direction(np.zeros((2, 2)), np.ones(2))
    with pytest.raises(SingularSystem):
        newton_direction(sp.csr_matrix((2, 2)), np.ones(2), sp.csr_matrix(np.array([[1.0, 0.0]])))


def test_damped_update_cases():
    prm = patch_test_params(Law.SATURATING)
    pb = PointProblem(prm)
    w = np.zeros(pb.size)
    load = pb.load_vector({"E3": 0.5 * prm.E0})
    newton, _ = newton_direction(pb.hessian(w, w, load), pb.residual(w, w, load))
    assert np.abs(pb.to_physical(w + newton)[pb.p_slice]).max() < 0.01 * prm.P0
    trial, alpha = damped_update(pb, w, newton, w, load)
    assert alpha == 1.0
    w = pb.from_physical(np.r_[np.zeros(6), 0, 0, 0.1, 0, 0, 0.1])
    trial, alpha = damped_update(pb, w, np.zeros(pb.size), w, load)
    assert alpha == 1.0 and np.array_equal(trial, w)
    over = np.zeros(pb.size)
    over[-1] = 2.0  # |P| would reach 2.33 P0
    trial, alpha = damped_update(pb, w, over, w, load)
    assert alpha < 1.0
    assert pb.saturation_guard(trial)


def test_damping_gives_up_at_saturation():
    prm = patch_test_params(Law.SATURATING)
    pb = PointProblem(prm)
    w = np.zeros(pb.size)
    w[-1] = 1.0 - 1e-7  # already past the margin
    step = np.zeros(pb.size)
    step[-1] = 1.0
    with pytest.raises(SaturationReached):
        damped_update(pb, w, step, w, np.zeros(pb.size))


def test_schedule_validation():
    assert len(Schedule()) == 0
    with pytest.raises(ValueError):
        Schedule((LoadStep(1.0, {}), LoadStep(1.0, {})))
    with pytest.raises(ValueError):
        Schedule((LoadStep(0.0, {}),))
    with pytest.raises(ValueError):
        Schedule.ramps([(0, {"E3": 1.0})])
    sch = Schedule.ramps([(2, {"E3": 2.0}), (2, {"T33": -4.0})])
    assert [s.t for s in sch] == [1.0, 2.0, 3.0, 4.0]
    assert [float(s.data["E3"]) for s in sch] == [1.0, 2.0, 2.0, 2.0]
    assert [float(s.data["T33"]) for s in sch] == [0.0, 0.0, -2.0, -4.0]


def test_empty_schedule_gives_empty_trajectory():
    traj = run_schedule(PointProblem(patch_test_params()), Schedule())
    assert len(traj) == 0 and len(traj.states) == 1
    assert not traj.states[0].any()


def test_unchanged_load_is_a_fixed_point():
    # a purely mechanical load exerts no driving force on P = 0 without remanent strain,
    # so the second solve has nothing left to do
    pb = PointProblem(patch_test_params(remanent_strain=False))
    load = pb.load_vector({"T33": -50e6})
    w1, _ = solve_step(pb, np.zeros(pb.size), load)
    w2, rep = solve_step(pb, w1, load)
    assert rep.iterations == 1 and rep.converged
    np.testing.assert_array_equal(w2, w1)


def test_sub_coercive_load_leaves_polarization():
    prm = patch_test_params(Law.QUADRATIC, remanent_strain=False, d31=0.0, d33=0.0)
    pb = PointProblem(prm)
    w, rep = solve_step(pb, np.zeros(pb.size), pb.load_vector({"E3": 0.5 * prm.E0}))
    P = pb.to_physical(w)[pb.p_slice]
    assert np.linalg.norm(P) <= prm.reg_eps
    assert rep.converged


def test_residual_is_gradient_of_incremental_objective(rng):
    for law, dp in [(Law.QUADRATIC, 1e-2), (Law.SATURATING, 1e-2), (Law.SATURATING, 1e-8)]:
        prm = patch_test_params(law)
        pb = PointProblem(prm)
        for _ in range(5):
            x_prev = rng.normal(size=pb.size) * 0.3
            x = x_prev + rng.normal(size=pb.size) * 0.1
            # increment outside (1e-2) or inside (1e-8) the smoothing zone; scaled eps is 1e-6
            x[pb.p_slice] = x_prev[pb.p_slice] + rng.normal(size=3) * dp
            load = rng.normal(size=pb.size)
            g = pb.residual(x, x_prev, load)
            fd = np.zeros_like(g)
            for k in range(pb.size):
                h = 1e-7
                e = np.zeros(pb.size)
                e[k] = h
                fd[k] = (pb.energy(x + e, x_prev, load) - pb.energy(x - e, x_prev, load)) / (2 * h)
            assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


def test_converged_steps_satisfy_regularized_kkt():
    prm = patch_test_params(Law.SATURATING)
    pb = PointProblem(prm)
    traj = run_schedule(pb, virgin_ramp(prm, 1.5, 30))
    slack = 1e-4 * prm.E0
    for x_prev, x in zip(traj.states[:-1], traj.states[1:]):
        w, w_prev = pb.to_physical(x), pb.to_physical(x_prev)
        _, grad = c.energy_derivatives(w, prm, 3, order=1)
        ehat = -grad[pb.p_slice]
        dP = w[pb.p_slice] - w_prev[pb.p_slice]
        size = np.linalg.norm(dP)
        if size <= prm.reg_eps:
            assert np.linalg.norm(ehat) <= prm.E0 + slack
        else:
            np.testing.assert_allclose(ehat, prm.E0 * dP / size, atol=slack)


def test_residuals_contract_in_the_final_iterations():
    # the merit decreases monotonically; the residual may grow while ΔP crosses the
    # smoothing zone, but the last iterations are in the region of fast convergence
    prm = patch_test_params(Law.SATURATING)
    traj = run_schedule(PointProblem(prm), virgin_ramp(prm, 1.5, 30))
    for rep in traj.reports:
        tail = rep.residual_norms[-3:]
        assert all(b < 0.1 * a for a, b in zip(tail, tail[1:]))


def test_rate_independence():
    prm = patch_test_params(Law.QUADRATIC)
    finals = []
    for n in (10, 20):
        pb = PointProblem(prm)
        traj = run_schedule(pb, virgin_ramp(prm, 1.5, n))
        finals.append(pb.to_physical(traj.states[-1])[pb.p_slice])
    assert np.linalg.norm(finals[0] - finals[1]) <= 5 * prm.reg_eps


def test_failure_carries_step_index():
    pb = PointProblem(patch_test_params(Law.SATURATING))
    with pytest.raises(NoConvergence) as info:
        run_schedule(pb, virgin_ramp(pb.params, 1.5, 10), max_iter=1)
    assert info.value.step is not None
    assert info.value.trajectory is not None
    assert len(info.value.trajectory) == info.value.step - 1


def test_trajectory_logs_stability_quantities():
    prm = patch_test_params()
    traj = run_schedule(PointProblem(prm), virgin_ramp(prm, 1.0, 4))
    assert len(traj.increment_norms) == len(traj.load_increment_norms) == 4
    assert {"step", "iteration", "residual", "alpha"} <= set(traj.iteration_log[0])
