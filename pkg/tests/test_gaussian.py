import math

import numpy as np
import pytest

from smp.errors import EmptyEstimate, SingularDesign
from smp.gaussian import (
    gaussian_design_trace,
    linear_smp_bound_mc,
    linear_smp_predict,
    location_minimax,
    location_minimax_risk,
    location_mle,
    location_smp,
    location_smp_bound,
    location_smp_wellspecified_risk,
    ols_fit,
    ridge_fit,
    ridge_log_norm_bound,
    ridge_log_norm_lambda,
    ridge_smp_predict,
)
from smp.generators import RademacherDesign, StandardGaussianDesign

from oracles import normal_pdf, refit_density_grid


# ---------------------------------------------------------------- location


def test_location_smp_examples():
    p = location_smp(np.zeros((1, 2)), np.eye(2))
    np.testing.assert_array_equal(p.mean, [0.0, 0.0])
    np.testing.assert_allclose(p.cov, 4 * np.eye(2))
    p = location_smp([[0.0], [3.0], [6.0]], [[1.0]])
    assert p.mean[0] == 3.0
    assert p.cov[0, 0] == pytest.approx(16 / 9, rel=1e-15)
    big = location_smp(np.zeros((10**5, 1)), [[2.0]])
    assert big.cov[0, 0] == pytest.approx(2.0, rel=3e-5)


def test_location_minimax_examples():
    assert location_minimax(np.zeros((1, 3)), np.eye(3)).cov == pytest.approx(2 * np.eye(3))
    assert location_minimax(np.ones((9, 2)), np.eye(2)).cov == pytest.approx(10 / 9 * np.eye(2))
    assert location_minimax_risk(10, 3) == pytest.approx(1.5 * math.log(1.1), rel=1e-15)
    assert location_minimax_risk(10, 3) == pytest.approx(0.142966, abs=1e-6)


def test_location_mle_is_sample_mean():
    Y = np.array([[1.0, 2.0], [3.0, -2.0]])
    p = location_mle(Y, np.eye(2))
    np.testing.assert_array_equal(p.mean, [2.0, 0.0])


def test_location_wellspecified_risk_closed_form():
    # E KL(N(m, S) || N(Ybar, c^2 S)) with c = 1 + 1/n, Ybar ~ N(m, S/n):
    # d log c + d (1 + 1/n) / (2 c^2) - d/2, evaluated independently
    for n, d in [(1, 1), (10, 3), (37, 5)]:
        c = 1 + 1 / n
        direct = d * math.log(c) + 0.5 * d * (1 + 1 / n) / c**2 - 0.5 * d
        assert location_smp_wellspecified_risk(n, d) == pytest.approx(direct, rel=1e-13)
        assert location_smp_wellspecified_risk(n, d) <= location_smp_bound(n, d)
    assert location_smp_wellspecified_risk(10, 3) == pytest.approx(0.1495669, abs=1e-7)


# ---------------------------------------------------------------- OLS / ridge fits


def test_ols_examples():
    assert ols_fit([[1.0]], [2.0]).theta == pytest.approx([2.0])
    np.testing.assert_allclose(ols_fit(np.eye(2), [1.0, 2.0]).theta, [1.0, 2.0])
    assert ols_fit([[1.0], [2.0]], [1.0, 4.0]).theta[0] == pytest.approx(1.8, rel=1e-15)


def test_ols_singular():
    with pytest.raises(SingularDesign):
        ols_fit([[1.0, 1.0], [2.0, 2.0]], [1.0, 2.0])
    with pytest.raises(SingularDesign):
        ols_fit([[1.0, 0.0]], [1.0])


def test_ridge_examples(rng):
    assert ridge_fit([[1.0]], [2.0], 1.0).theta[0] == pytest.approx(1.0, rel=1e-15)
    X = rng.standard_normal((30, 3))
    y = rng.standard_normal(30)
    assert np.linalg.norm(ridge_fit(X, y, 1e9).theta) < 1e-8
    np.testing.assert_allclose(ridge_fit(X, y, 1e-12).theta, ols_fit(X, y).theta, rtol=1e-9)
    with pytest.raises(ValueError):
        ridge_fit(X, y, 0.0)


# ---------------------------------------------------------------- plain SMP


def test_linear_smp_examples():
    fit = ols_fit([[1.0]], [2.0])
    p = linear_smp_predict(fit, [1.0])
    assert float(p.mean) == 2.0 and float(p.variance) == 4.0
    p0 = linear_smp_predict(fit, [0.0])
    assert float(p0.mean) == 0.0 and float(p0.variance) == 1.0


def test_linear_smp_variance_limit(rng):
    X = rng.standard_normal((20000, 2))
    p = linear_smp_predict(ols_fit(X, X @ [1.0, 1.0]), [0.3, -0.4])
    assert float(p.variance) == pytest.approx(1.0, abs=1e-3)


def test_linear_smp_leverage_identity_and_mean(rng):
    for _ in range(50):
        n, d = int(rng.integers(3, 15)), int(rng.integers(1, 3))
        X = rng.standard_normal((n, d))
        y = rng.standard_normal(n)
        x = rng.standard_normal(d) * 2
        fit = ols_fit(X, y)
        p = linear_smp_predict(fit, x)
        Xa = np.vstack([X, x])
        h = x @ np.linalg.solve(Xa.T @ Xa, x)
        assert math.sqrt(float(p.variance)) == pytest.approx(1 / (1 - h), rel=1e-10)
        assert float(p.mean) == float(x @ fit.theta)


def test_linear_smp_matches_quadrature(rng):
    for _ in range(10):
        n, d = int(rng.integers(3, 10)), int(rng.integers(1, 3))
        X = rng.standard_normal((n, d))
        y = X @ rng.standard_normal(d) + rng.standard_normal(n)
        x = rng.standard_normal(d)
        span = 12 * (1 + x @ x) + 3 * np.abs(y).max()
        grid = np.linspace(-span, span, 4001)
        ref = refit_density_grid(X, y, 0.0, x, grid)
        p = linear_smp_predict(ols_fit(X, y), x)
        np.testing.assert_allclose(normal_pdf(grid, float(p.mean), float(p.variance)), ref, atol=1e-8)


def test_affine_equivariance(rng):
    for _ in range(20):
        n, d = 12, 3
        X = rng.standard_normal((n, d))
        y = rng.standard_normal(n)
        x = rng.standard_normal(d)
        A = rng.standard_normal((d, d)) + 3 * np.eye(d)
        raw = linear_smp_predict(ols_fit(X, y), x)
        moved = linear_smp_predict(ols_fit(X @ A.T, y), A @ x)
        assert float(moved.mean) == pytest.approx(float(raw.mean), abs=1e-8, rel=1e-8)
        assert float(moved.variance) == pytest.approx(float(raw.variance), rel=1e-8)


def test_batch_matches_single(rng):
    X = rng.standard_normal((15, 3))
    y = rng.standard_normal(15)
    Q = rng.standard_normal((6, 3))
    fit = ols_fit(X, y)
    batch = linear_smp_predict(fit, Q)
    for k in range(6):
        one = linear_smp_predict(fit, Q[k])
        assert float(one.mean) == pytest.approx(batch.mean[k], rel=1e-14)
        assert float(one.variance) == pytest.approx(batch.variance[k], rel=1e-14)
    rb = ridge_smp_predict(X, y, 0.3, Q)
    for k in range(6):
        one = ridge_smp_predict(X, y, 0.3, Q[k])
        assert float(one.mean) == pytest.approx(rb.mean[k], rel=1e-13)


# ---------------------------------------------------------------- ridge SMP


def test_ridge_smp_hand_example():
    p = ridge_smp_predict([[1.0]], [1.0], 1.0, [1.0])
    assert float(p.variance) == pytest.approx(1.6, rel=1e-14)
    assert float(p.mean) == pytest.approx(0.2, rel=1e-14)


def test_ridge_smp_zero_query(rng):
    X = rng.standard_normal((5, 2))
    p = ridge_smp_predict(X, rng.standard_normal(5), 0.7, np.zeros(2))
    assert float(p.mean) == 0.0 and float(p.variance) == 1.0


def test_ridge_smp_small_lambda_continuity(rng):
    X = rng.standard_normal((30, 3))
    y = rng.standard_normal(30)
    for x in rng.standard_normal((5, 3)):
        plain = linear_smp_predict(ols_fit(X, y), x)
        ridge = ridge_smp_predict(X, y, 1e-10, x)
        assert float(ridge.mean) == pytest.approx(float(plain.mean), rel=1e-6, abs=1e-9)
        assert float(ridge.variance) == pytest.approx(float(plain.variance), rel=1e-6)


def test_ridge_smp_empty_training():
    # no data: theta(y) = x y / (|x|^2 + lam), checked against quadrature
    x = np.array([0.8, -0.6])
    grid = np.linspace(-40, 40, 4001)
    ref = refit_density_grid(np.zeros((0, 2)), np.zeros(0), 0.5, x, grid)
    p = ridge_smp_predict(np.zeros((0, 2)), np.zeros(0), 0.5, x)
    np.testing.assert_allclose(normal_pdf(grid, float(p.mean), float(p.variance)), ref, atol=1e-9)


# ---------------------------------------------------------------- bounds and tuning


def test_lambda_rule_examples():
    assert ridge_log_norm_lambda(1.0, 0, 1) == 1.0
    assert ridge_log_norm_lambda(2.0, 99, 4) == pytest.approx(0.01, rel=1e-15)
    assert ridge_log_norm_bound(2.0, 1.0, 99, 4) == pytest.approx(5 * 4 * math.log(3.0) / 100, rel=1e-15)


def test_gaussian_design_trace_mc():
    assert gaussian_design_trace(50, 5) == pytest.approx(250 / 44, rel=1e-15)
    est = linear_smp_bound_mc(StandardGaussianDesign(2), 20, 4000, seed=3)
    assert est.bound == pytest.approx(math.log1p(40 / 17 / 20))
    assert est.within(est.bound, n_se=4)


def test_rademacher_one_dim_exact():
    est = linear_smp_bound_mc(RademacherDesign(1), 7, 50, seed=1)
    assert est.mean == pytest.approx(math.log1p(1 / 7), rel=1e-14)
    assert est.bound == pytest.approx(math.log1p(1 / 7), rel=1e-14)


def test_zero_replicates():
    with pytest.raises(EmptyEstimate):
        linear_smp_bound_mc(StandardGaussianDesign(2), 10, 0, seed=0)
