from __future__ import annotations

import math

import numpy as np
import pytest

from gradtrack import (
    DegenerateDataError,
    LogisticLossSuite,
    OracleFailureError,
    QuarticTailSuite,
    SquareLossSuite,
    finite_diff_check,
    gen_linear_regression,
    gen_logistic_regression,
    gen_quartic_tail,
    suite_from_json,
)

from conftest import heterogeneous_quadratic


# -- square loss -----------------------------------------------------------


def test_single_sample_quadratic():
    # f(x) = (x - 3)^2
    s = SquareLossSuite(np.array([[[1.0]]]), np.array([[3.0]]))
    assert s.alpha == pytest.approx(2.0) and s.beta == pytest.approx(2.0)
    assert s.x_star == pytest.approx([3.0])
    assert s.f_star == pytest.approx(0.0, abs=1e-14)
    assert s.local_gradient(0, np.zeros(1)) == pytest.approx([-6.0])
    assert s.local_value(0, np.array([1.0])) == pytest.approx(4.0)


def test_linear_regression_recipe_constants():
    suite = gen_linear_regression(30, 20, 5, seed=2)
    assert suite.alpha > 0  # per-agent strong convexity at samples > dim
    assert suite.beta >= suite.alpha
    # independent recomputation of one agent's Hessian extremes
    h0 = 2.0 * suite.features[0].T @ suite.features[0]
    eig = np.linalg.eigvalsh(h0)
    assert suite.alpha <= eig[0] + 1e-9
    assert suite.beta >= eig[-1] - 1e-9
    assert np.allclose(suite.features[:, :, -1], 1.0)


def test_linear_regression_minimizer_is_stationary():
    suite = gen_linear_regression(50, 20, 5, seed=5)
    resid = np.linalg.norm(suite.global_gradient(suite.x_star))
    assert resid <= 1e-9 * suite.beta * (1.0 + np.linalg.norm(suite.x_star))


def test_linear_regression_deterministic():
    a = gen_linear_regression(10, 5, 3, seed=4)
    b = gen_linear_regression(10, 5, 3, seed=4)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.targets, b.targets)


def test_square_loss_gap_identity():
    suite = gen_linear_regression(10, 8, 3, seed=6)
    rng = np.random.default_rng(0)
    xs = rng.normal(0.0, 2.0, (7, 3))
    direct = suite.global_values(xs) - suite.f_star
    assert np.allclose(suite.objective_gaps(xs), direct, rtol=1e-9, atol=1e-9)


def test_square_loss_degenerate_data():
    with pytest.raises(DegenerateDataError):
        SquareLossSuite(np.zeros((2, 3, 2)), np.ones((2, 3)))


def test_global_matches_mean_of_locals():
    suite = gen_linear_regression(6, 5, 3, seed=1)
    x = np.array([0.3, -1.2, 0.7])
    ref_v = sum(suite.local_value(i, x) for i in range(6)) / 6.0
    ref_g = sum(suite.local_gradient(i, x) for i in range(6)) / 6.0
    assert suite.global_value(x) == pytest.approx(ref_v, rel=1e-12)
    assert np.allclose(suite.global_gradient(x), ref_g, rtol=1e-12)
    stack = suite.gradient_stack(np.tile(x, (6, 1)))
    for i in range(6):
        assert np.allclose(stack[i], suite.local_gradient(i, x), rtol=1e-12)


# -- logistic loss ----------------------------------------------------------


def test_logistic_value_at_zero_is_samples_ln2():
    suite = gen_logistic_regression(5, 20, 4, seed=3)
    assert suite.local_value(0, np.zeros(4)) == pytest.approx(20.0 * math.log(2.0))


def test_logistic_minimizer_accuracy():
    suite = gen_logistic_regression(20, 20, 5, seed=2)
    assert np.linalg.norm(suite.global_gradient(suite.x_star)) <= 1e-12 * suite.beta


def test_logistic_alpha_zero_with_local_curvature():
    suite = gen_logistic_regression(10, 20, 4, seed=7)
    assert suite.alpha == 0.0
    assert suite.curvature_at_minimizer > 0.0


def test_logistic_smoothness_sampled():
    suite = gen_logistic_regression(8, 15, 4, seed=9)
    rng = np.random.default_rng(1)
    for _ in range(200):
        i = int(rng.integers(8))
        x, y = rng.normal(0, 1, 4), rng.normal(0, 1, 4)
        lhs = np.linalg.norm(suite.local_gradient(i, x) - suite.local_gradient(i, y))
        assert lhs <= suite.beta * np.linalg.norm(x - y) * (1.0 + 1e-9)


def test_logistic_rejects_bad_labels():
    with pytest.raises(ValueError):
        LogisticLossSuite(np.ones((1, 2, 1)), np.array([[0.5, 1.0]]))


def test_logistic_separable_data_flagged():
    # lone agent, always-one labels: the minimizer runs off to infinity
    features = np.ones((1, 4, 1))
    targets = np.ones((1, 4))
    with pytest.raises((DegenerateDataError, OracleFailureError)):
        LogisticLossSuite(features, targets)


# -- quartic tail -----------------------------------------------------------


def test_quartic_tilts_cancel_exactly():
    for n in (2, 7, 100):
        suite = gen_quartic_tail(n, seed=3)
        assert suite.tilts.sum() == 0.0
        assert suite.f_star == 0.0
        assert suite.x_star == pytest.approx([0.0])


def test_quartic_branch_continuity():
    # both branches give u(1) = 1/4 and u'(1) = 1
    assert QuarticTailSuite.core_value(1.0) == pytest.approx(0.25)
    assert 1.0 - 0.75 == pytest.approx(0.25)
    assert QuarticTailSuite.core_gradient(1.0) == pytest.approx(1.0)
    assert QuarticTailSuite.core_gradient(1.0 + 1e-12) == pytest.approx(1.0)
    assert QuarticTailSuite.core_gradient(-1.0) == pytest.approx(-1.0)


def test_quartic_global_gradient_outer_branch():
    suite = gen_quartic_tail(12, seed=5)
    assert suite.global_gradient(np.array([2.0])) == pytest.approx([1.0], abs=1e-15)


def test_quartic_smoothness_constant_three():
    suite = gen_quartic_tail(6, seed=1)
    rng = np.random.default_rng(2)
    for _ in range(500):
        i = int(rng.integers(6))
        x, y = rng.normal(0, 1.5, 1), rng.normal(0, 1.5, 1)
        lhs = np.linalg.norm(suite.local_gradient(i, x) - suite.local_gradient(i, y))
        assert lhs <= 3.0 * np.linalg.norm(x - y) * (1.0 + 1e-9)


def test_quartic_single_agent_allowed():
    suite = gen_quartic_tail(1, seed=0)
    assert suite.tilts == pytest.approx([0.0])


# -- shared properties -------------------------------------------------------


def _suites():
    return [
        gen_linear_regression(6, 10, 3, seed=11),
        gen_logistic_regression(6, 10, 3, seed=11),
        gen_quartic_tail(6, seed=11),
    ]


def test_convexity_sampled_all_cases():
    rng = np.random.default_rng(3)
    for suite in _suites():
        for _ in range(200):
            i = int(rng.integers(suite.n))
            x = rng.normal(0, 1.5, suite.dim)
            y = rng.normal(0, 1.5, suite.dim)
            fx = suite.local_value(i, x)
            fy = suite.local_value(i, y)
            g = suite.local_gradient(i, x)
            scale = 1.0 + abs(fx) + abs(fy)
            assert fy >= fx + g @ (y - x) - 1e-9 * scale


def test_finite_diff_all_cases():
    s1, s2, s3 = _suites()
    assert finite_diff_check(s1, 60, seed=0) <= 1e-6
    assert finite_diff_check(s2, 60, seed=0) <= 1e-5
    assert finite_diff_check(s3, 60, seed=0) <= 1e-5


def test_quartic_finite_diff_away_from_kink():
    suite = gen_quartic_tail(5, seed=2)
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(200):
        i = int(rng.integers(5))
        x = rng.normal(0.0, 2.0, 1)
        if min(abs(abs(x[0]) - 1.0), 1.0) < 0.05:
            continue  # skip the curvature kink at +-1
        g = suite.local_gradient(i, x)
        h = 1e-6 * (1.0 + abs(x[0]))
        fd = (suite.local_value(i, x + h) - suite.local_value(i, x - h)) / (2 * h)
        worst = max(worst, abs(fd - g[0]) / (1.0 + abs(g[0])))
    assert worst <= 1e-6


def test_coercivity_inequality_square_loss():
    suite = gen_linear_regression(15, 20, 4, seed=8)
    a, b = suite.alpha, suite.beta
    rng = np.random.default_rng(5)
    for _ in range(300):
        x, y = rng.normal(0, 3, 4), rng.normal(0, 3, 4)
        gx, gy = suite.global_gradient(x), suite.global_gradient(y)
        lhs = (gx - gy) @ (x - y)
        rhs = (a * b / (a + b)) * np.sum((x - y) ** 2) + np.sum((gx - gy) ** 2) / (a + b)
        assert lhs >= rhs - 1e-8 * b * (1.0 + np.sum((x - y) ** 2))


def test_descent_contraction_square_loss():
    suite = gen_linear_regression(15, 20, 4, seed=8)
    a, b = suite.alpha, suite.beta
    rng = np.random.default_rng(6)
    for eta in np.linspace(0.05, 1.95, 12) / b:
        lam = max(abs(1 - eta * a), abs(1 - eta * b))
        for _ in range(25):
            x = rng.normal(0, 3, 4)
            xp = x - eta * suite.global_gradient(x)
            d0 = np.linalg.norm(x - suite.x_star)
            d1 = np.linalg.norm(xp - suite.x_star)
            assert d1 <= lam * d0 + 1e-10 * (1.0 + d0)


def test_domain_error_on_nonfinite_point():
    suite = gen_linear_regression(3, 4, 2, seed=0)
    with pytest.raises(ValueError):
        suite.local_value(0, np.array([np.nan, 0.0]))
    with pytest.raises(ValueError):
        suite.local_gradient(0, np.array([np.inf, 0.0]))


def test_serialization_round_trip():
    probes = np.random.default_rng(9).normal(0, 1, (4, 3))
    for suite in _suites():
        back = suite_from_json(suite.to_json())
        assert back.n == suite.n and back.dim == suite.dim
        assert back.alpha == pytest.approx(suite.alpha)
        assert back.beta == pytest.approx(suite.beta)
        assert np.allclose(back.x_star, suite.x_star)
        assert back.f_star == pytest.approx(suite.f_star)
        pts = probes[:, : suite.dim]
        for i in (0, suite.n - 1):
            for p in pts:
                assert back.local_value(i, p) == pytest.approx(suite.local_value(i, p))
                assert np.allclose(back.local_gradient(i, p), suite.local_gradient(i, p))


def test_heterogeneous_quadratic_fixture_constants():
    suite = heterogeneous_quadratic(8, seed=42)
    assert suite.alpha == pytest.approx(1.0, abs=1e-12)
    assert suite.beta == pytest.approx(4.0, abs=1e-12)
