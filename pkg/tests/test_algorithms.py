from __future__ import annotations

import numpy as np
import pytest

from gradtrack import (
    DivergenceError,
    SquareLossSuite,
    StepSchedule,
    cgd_step,
    gen_linear_regression,
    gen_logistic_regression,
    gen_quartic_tail,
    gt_init,
    gt_step,
    run,
)

from conftest import heterogeneous_quadratic, two_agent_pull_suite


def test_gt_init_seeds_trackers_with_gradients():
    suite = gen_linear_regression(4, 5, 2, seed=1)
    x0 = np.zeros((4, 2))
    state = gt_init(suite, x0)
    assert state.t == 0
    assert np.array_equal(state.s, suite.gradient_stack(x0))
    assert np.array_equal(state.s.mean(axis=0), state.grad.mean(axis=0))


def test_gt_init_identical_agents_identical_trackers():
    feats = np.tile(np.array([[[1.0, 0.5], [0.2, 1.3]]]), (3, 1, 1))
    targs = np.tile(np.array([[2.0, -1.0]]), (3, 1))
    suite = SquareLossSuite(feats, targs)
    state = gt_init(suite, np.zeros((3, 2)))
    assert np.allclose(state.s[0], state.s[1]) and np.allclose(state.s[1], state.s[2])


def test_gt_init_shape_error():
    suite = gen_linear_regression(4, 5, 2, seed=1)
    with pytest.raises(ValueError):
        gt_init(suite, np.zeros((3, 2)))


def test_gt_step_matches_hand_update():
    suite = heterogeneous_quadratic(5, seed=7)
    rng = np.random.default_rng(0)
    w = np.full((5, 5), 0.1) + np.eye(5) * 0.5
    x0 = rng.normal(0, 2, (5, 2))
    state = gt_init(suite, x0)
    eta = 0.01
    new = gt_step(state, w, eta, suite)
    x_ref = w @ x0 - eta * suite.gradient_stack(x0)
    s_ref = w @ state.s + suite.gradient_stack(x_ref) - suite.gradient_stack(x0)
    assert np.allclose(new.x, x_ref, atol=1e-15)
    assert np.allclose(new.s, s_ref, atol=1e-12)
    assert new.t == 1


def test_gt_fixed_point_is_stationary():
    suite = two_agent_pull_suite()
    w = np.full((2, 2), 0.5)
    x_star = np.tile(suite.x_star, (2, 1))
    state = gt_init(suite, x_star)
    state.s = np.zeros_like(state.s)
    new = gt_step(state, w, 0.1, suite)
    assert np.allclose(new.x, x_star, atol=1e-14)
    assert np.allclose(new.s, 0.0, atol=1e-13)


def test_single_agent_gt_equals_cgd_exactly():
    suite = SquareLossSuite(np.array([[[1.0]]]), np.array([[3.0]]))
    w1 = np.array([[1.0]])
    x = np.array([[10.0]])
    state = gt_init(suite, x)
    xc = x[0].copy()
    for _ in range(200):
        state = gt_step(state, w1, 0.3, suite)
        xc = cgd_step(xc, 0.3, suite)
        assert np.array_equal(state.x[0], xc)


def test_identical_agents_follow_centralized_path():
    feats = np.tile(np.array([[[0.9, 0.1], [0.2, 1.1]]]), (5, 1, 1))
    targs = np.tile(np.array([[1.0, -2.0]]), (5, 1))
    suite = SquareLossSuite(feats, targs)
    w = np.full((5, 5), 0.2)
    x0 = np.tile(np.array([3.0, -1.0]), (5, 1))
    rec = run("gt", suite, 500, x0, w=w, eta=0.05)
    ref = run("cgd", suite, 500, x0[0], eta=0.05)
    scale = 1.0 + np.abs(ref.final_x).max()
    assert np.abs(rec.final_x - ref.final_x).max() <= 1e-12 * scale
    assert np.abs(rec.avg_obj_err - ref.avg_obj_err).max() <= 1e-12 * (1 + ref.avg_obj_err[0])


def test_dgd_two_agent_plateau_and_gt_exactness(pull_suite):
    w = np.full((2, 2), 0.5)
    x0 = np.array([[2.0], [-3.0]])
    rec = run("dgd_fixed", pull_suite, 800, x0, w=w, eta=0.1)
    # independent oracle: the affine fixed point solves (1.2 I - W) x = 0.2 c
    fixed = np.linalg.solve(1.2 * np.eye(2) - w, 0.2 * np.array([1.0, -1.0]))
    assert fixed == pytest.approx([1 / 6, -1 / 6])
    assert rec.final_x[:, 0] == pytest.approx(fixed, abs=1e-12)
    assert rec.avg_obj_err[-1] == pytest.approx(1 / 36, abs=1e-12)
    gt_rec = run("gt", pull_suite, 800, x0, w=w, eta=0.1)
    assert np.abs(gt_rec.final_x).max() <= 1e-10


def test_vanishing_schedule_values():
    sched = StepSchedule("vanishing", 0.5)
    assert sched.at(0) == 0.5
    assert sched.at(3) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        StepSchedule("quadratic", 0.5)
    with pytest.raises(ValueError):
        StepSchedule("fixed", -1.0)


def test_dgd_vanishing_still_moves_toward_optimum(pull_suite):
    w = np.full((2, 2), 0.5)
    x0 = np.array([[2.0], [-3.0]])
    rec = run("dgd_vanishing", pull_suite, 3000, x0, w=w, eta=0.5)
    assert rec.avg_obj_err[-1] < 1e-4 * rec.init["avg_obj_err"]


def test_divergence_error_carries_iteration():
    suite = gen_linear_regression(5, 10, 3, seed=2)
    w = np.full((5, 5), 0.2)
    x0 = np.random.default_rng(1).normal(0, 5, (5, 3))
    with pytest.raises(DivergenceError) as info:
        run("gt", suite, 1000, x0, w=w, eta=1e6)
    assert info.value.iteration is not None and info.value.iteration >= 1


def test_permutation_equivariance():
    suite = heterogeneous_quadratic(6, seed=9)
    g = np.random.default_rng(3)
    w = np.full((6, 6), 0.05) + np.eye(6) * 0.7
    x0 = g.normal(0, 4, (6, 2))
    perm = np.array([3, 0, 5, 1, 4, 2])
    suite_p = SquareLossSuite(suite.features[perm], suite.targets[perm])
    rec = run("gt", suite, 400, x0, w=w, eta=0.02)
    rec_p = run("gt", suite_p, 400, x0[perm], w=w[np.ix_(perm, perm)], eta=0.02)
    assert np.allclose(rec_p.final_x, rec.final_x[perm], atol=1e-9)
    assert np.allclose(rec_p.avg_obj_err, rec.avg_obj_err, atol=1e-9)


def test_target_gap_truncates_run(pull_suite):
    w = np.full((2, 2), 0.5)
    x0 = np.array([[2.0], [-3.0]])
    rec = run("gt", pull_suite, 5000, x0, w=w, eta=0.1, target_gap=1e-6)
    assert rec.reached_at is not None and rec.reached_at < 5000
    assert rec.t.shape[0] == rec.reached_at
    assert rec.avg_obj_err[-1] <= 1e-6
    assert rec.avg_obj_err[-2] > 1e-6


def test_single_round_record(pull_suite):
    w = np.full((2, 2), 0.5)
    rec = run("gt", pull_suite, 1, np.array([[1.0], [2.0]]), w=w, eta=0.1)
    assert rec.t.tolist() == [1]
    assert rec.avg_obj_err.shape == (1,)
    assert rec.error_vector_path().shape == (2, 3)


def test_light_mode_skips_heavy_metrics(pull_suite):
    w = np.full((2, 2), 0.5)
    rec = run("gt", pull_suite, 50, np.array([[1.0], [2.0]]), w=w, eta=0.1, collect="light")
    assert rec.consensus_err is None and rec.tracking_err is None
    assert rec.avg_obj_err.shape == (50,)
    with pytest.raises(ValueError):
        rec.error_vector_path()


def test_average_state_identities_short_run():
    suite = gen_linear_regression(12, 10, 3, seed=4)
    w = np.full((12, 12), 1.0 / 12.0)
    x0 = np.random.default_rng(2).normal(0, 5, (12, 3))
    rec = run("gt", suite, 300, x0, w=w, eta=1e-6, track_identities=True)
    tol = 1e-10 * suite.beta * (1.0 + rec.max_state_norm)
    assert rec.identities["sbar_gap"].max() <= tol
    assert rec.identities["xbar_resid"].max() <= tol


def test_gradient_difference_inequalities_short_run():
    suite = gen_linear_regression(12, 10, 3, seed=4)
    w = np.full((12, 12), 1.0 / 12.0)
    x0 = np.random.default_rng(2).normal(0, 5, (12, 3))
    rec = run("gt", suite, 300, x0, w=w, eta=1e-6, track_identities=True)
    b, n = suite.beta, 12
    slack = 1.0 + 1e-9
    ident = rec.identities
    assert np.all(ident["grad_diff"] <= b * ident["x_diff"] * slack)
    assert np.all(ident["gbar_diff"] <= b / np.sqrt(n) * ident["x_diff"] * slack)
    assert np.all(ident["g_minus_h"] <= b / np.sqrt(n) * rec.consensus_err * slack)


def test_runavg_matches_direct_average(pull_suite):
    w = np.full((2, 2), 0.5)
    x0 = np.array([[2.0], [-3.0]])
    rounds = 40
    rec = run("gt", pull_suite, rounds, x0, w=w, eta=0.05)
    # replay the trajectory and average it directly
    state = gt_init(pull_suite, x0)
    xs = []
    for _ in range(rounds):
        state = gt_step(state, w, 0.05, pull_suite)
        xs.append(state.x.copy())
    xhat = np.mean(xs, axis=0)
    direct = pull_suite.objective_gaps(xhat).mean()
    assert rec.runavg_obj_err[-1] == pytest.approx(direct, rel=1e-10)


def test_cgd_runs_from_mean_of_rows():
    suite = gen_quartic_tail(4, seed=2)
    x0 = np.array([[1.0], [2.0], [3.0], [6.0]])
    rec = run("cgd", suite, 10, x0, eta=0.1)
    assert rec.init["dist_to_opt"] == pytest.approx(3.0)


def test_unknown_algorithm_rejected(pull_suite):
    with pytest.raises(ValueError):
        run("sgd", pull_suite, 10, np.zeros((2, 1)), eta=0.1)


def test_logistic_gt_converges_to_minimizer():
    suite = gen_logistic_regression(8, 12, 3, seed=6)
    w = np.full((8, 8), 1.0 / 8.0)
    x0 = np.random.default_rng(7).normal(0, 1, (8, 3))
    rec = run("gt", suite, 4000, x0, w=w, eta=0.5 / suite.beta)
    assert rec.avg_obj_err[-1] < 1e-10 * (1.0 + abs(suite.f_star))
