import math

import numpy as np
import pytest
from scipy.optimize import minimize

from smp.errors import EmptyEstimate, TooManyFailures, SingularDesign
from smp.gaussian import GaussianDensity, ScalarGaussianPredictive, ols_fit, linear_smp_predict
from smp.generators import (
    BoundedSphereDesign,
    HeteroscedasticNoise,
    LinearGaussianGenerator,
    LogisticGenerator,
    MultinomialGenerator,
    StandardGaussianDesign,
    StudentTNoise,
    TableDesign,
)
from smp.logistic import BernoulliPredictive, LogisticSMP, as_z
from smp.montecarlo import RiskEstimate, run_replicates
from smp.multinomial import CategoricalDensity, multinomial_smp
from smp.numerics import log_sigmoid
from smp.risk import (
    Comparator,
    excess_risk_mc,
    gaussian_cross_entropy,
    kl_categorical,
    kl_gaussian,
    linear_best_in_ball,
    linear_penalized_oracle,
    logistic_best_in_ball,
    risk_bernoulli_conditional,
    risk_gaussian_conditional,
)


def test_kl_categorical_examples():
    assert kl_categorical([0.2, 0.8], [0.2, 0.8]) == 0.0
    assert kl_categorical([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), rel=1e-15)
    assert kl_categorical([0.5, 0.5], [1.0, 0.0]) == math.inf


def test_kl_gaussian_examples():
    p = GaussianDensity(np.zeros(1), np.eye(1))
    assert kl_gaussian(p, p) == 0.0
    q = GaussianDensity(np.zeros(1), 4 * np.eye(1))
    assert kl_gaussian(p, q) == pytest.approx(0.5 * (0.25 - 1 + math.log(4)), rel=1e-14)
    assert kl_gaussian(GaussianDensity(np.ones(1), np.eye(1)), p) == pytest.approx(0.5, rel=1e-14)


def test_gaussian_cross_entropy_by_sampling(rng):
    # moment formula vs brute-force average of -log q(Y) for Student-t Y
    q = GaussianDensity(np.array([0.3, -0.2]), np.array([[2.0, 0.4], [0.4, 1.0]]))
    Y = rng.standard_t(5, size=(400000, 2)) * math.sqrt(3 / 5)
    ce = gaussian_cross_entropy(np.zeros(2), np.eye(2), q)
    assert ce == pytest.approx(-np.mean(q.log_density(Y)), abs=5e-3)


def test_gaussian_conditional_risk_examples(rng):
    theta = np.array([1.0, -1.0])
    gen = LinearGaussianGenerator(theta, StandardGaussianDesign(2))
    x = rng.standard_normal((50, 2))
    truth = lambda q: ScalarGaussianPredictive(q @ theta, np.ones(q.shape[0]))
    wide = lambda q: ScalarGaussianPredictive(q @ theta, 4 * np.ones(q.shape[0]))
    base = risk_gaussian_conditional(truth, gen, x)
    assert base == pytest.approx(0.5, rel=1e-15)
    assert risk_gaussian_conditional(wide, gen, x) - base == pytest.approx(0.5 * (0.25 - 1 + math.log(4)), rel=1e-13)
    delta = np.array([0.3, 0.1])
    off = lambda q: ScalarGaussianPredictive(q @ (theta + delta), np.ones(q.shape[0]))
    emp_cov = x.T @ x / x.shape[0]
    assert risk_gaussian_conditional(off, gen, x) - base == pytest.approx(0.5 * delta @ emp_cov @ delta, rel=1e-12)


def test_bernoulli_conditional_risk_examples():
    gen_one = LogisticGenerator(TableDesign(np.array([[1.0]])), eta_fn=lambda x: np.ones(x.shape[0]))
    assert risk_bernoulli_conditional(BernoulliPredictive(np.array(0.5)), gen_one, [[1.0]]) == pytest.approx(math.log(2))
    gen = LogisticGenerator(TableDesign(np.array([[1.0]])), eta_fn=lambda x: np.full(x.shape[0], 0.8))
    val = risk_bernoulli_conditional(lambda q: BernoulliPredictive(np.full(q.shape[0], 0.6)), gen, [[1.0]])
    assert val == pytest.approx(0.8 * -math.log(0.6) + 0.2 * -math.log(0.4), rel=1e-14)
    assert val == pytest.approx(0.5919186, abs=5e-8)
    ent = risk_bernoulli_conditional(lambda q: BernoulliPredictive(np.full(q.shape[0], 0.8)), gen, [[1.0]])
    assert ent == pytest.approx(-(0.8 * math.log(0.8) + 0.2 * math.log(0.2)), rel=1e-14)


# ---------------------------------------------------------------- comparators


def test_linear_penalized_oracle_direct(rng):
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    gen = LinearGaussianGenerator(np.array([1.0, 2.0]), StandardGaussianDesign(2, cov))
    lam = 0.7
    comp = linear_penalized_oracle(gen, lam)
    obj = lambda t: 0.5 * (t - gen.theta) @ cov @ (t - gen.theta) + 0.5 * lam * t @ t
    ref = minimize(obj, np.zeros(2), method="BFGS", options={"gtol": 1e-12}).x
    np.testing.assert_allclose(comp.theta, ref, atol=1e-7)
    assert comp.penalty == pytest.approx(0.5 * lam * ref @ ref, rel=1e-6)


def test_linear_best_in_ball_vs_slsqp():
    cov = np.diag([3.0, 1.0, 0.2])
    theta_star = np.array([2.0, -1.0, 3.0])
    gen = LinearGaussianGenerator(theta_star, StandardGaussianDesign(3, cov))
    B = 1.5
    comp = linear_best_in_ball(gen, B)
    obj = lambda t: 0.5 * (t - theta_star) @ cov @ (t - theta_star)
    cons = {"type": "ineq", "fun": lambda t: B**2 - t @ t}
    ref = minimize(obj, np.zeros(3), method="SLSQP", constraints=[cons], options={"ftol": 1e-14}).x
    np.testing.assert_allclose(comp.theta, ref, atol=1e-6)
    assert np.linalg.norm(comp.theta) == pytest.approx(B, rel=1e-10)
    inside = linear_best_in_ball(gen, 10.0)
    np.testing.assert_allclose(inside.theta, theta_star)


def test_logistic_best_in_ball_vs_slsqp():
    gen = LogisticGenerator(BoundedSphereDesign(2, 1.0), np.array([3.0, 1.0]))
    B = 1.0
    comp = logistic_best_in_ball(gen, B, n_samples=2000, seed=5)
    rng = np.random.default_rng([5, 0xBA11])
    x = gen.design.sample(rng, 2000)
    eta = gen.eta(x)

    def risk(t):
        u = x @ t
        return -np.mean(eta * log_sigmoid(u) + (1 - eta) * log_sigmoid(-u))

    cons = {"type": "ineq", "fun": lambda t: B**2 - t @ t}
    ref = minimize(risk, np.zeros(2), method="SLSQP", constraints=[cons], options={"ftol": 1e-15}).x
    np.testing.assert_allclose(comp.theta, ref, atol=1e-5)
    # cached on a second call
    assert logistic_best_in_ball(gen, B, n_samples=2000, seed=5) is comp


# ---------------------------------------------------------------- Monte Carlo


def test_truth_stub_has_zero_excess():
    gen = LinearGaussianGenerator(np.array([0.5, 0.5]), StandardGaussianDesign(2))
    stub = lambda sample: (lambda q: ScalarGaussianPredictive(q @ gen.theta, np.ones(q.shape[0])))
    est = excess_risk_mc(stub, gen, 10, 50, seed=1, n_test=3)
    assert est.mean == 0.0 and est.std_err == 0.0
    pgen = MultinomialGenerator(np.array([0.2, 0.3, 0.5]))
    est = excess_risk_mc(lambda c: CategoricalDensity(pgen.p), pgen, 10, 20, seed=1)
    assert est.mean == 0.0


def test_point_mass_every_replicate():
    gen = MultinomialGenerator(np.array([0.0, 1.0, 0.0, 0.0]))
    values, _ = run_replicates(lambda r: kl_categorical(gen.p, multinomial_smp(gen.sample(r, 9))), 30, 0)
    np.testing.assert_allclose(values, math.log(13 / 10), rtol=1e-12)


def test_seed_determinism_and_threads(monkeypatch):
    gen = LinearGaussianGenerator(np.array([1.0, 0.0, -1.0]), StandardGaussianDesign(3), StudentTNoise(5.0))
    est = lambda s: (lambda q, f=ols_fit(*s): linear_smp_predict(f, q))
    a = excess_risk_mc(est, gen, 12, 200, seed=99)
    b = excess_risk_mc(est, gen, 12, 200, seed=99)
    c = excess_risk_mc(est, gen, 12, 200, seed=99, n_jobs=3)
    monkeypatch.setenv("SMP_THREADS", "2")
    d = excess_risk_mc(est, gen, 12, 200, seed=99)
    assert a == b == c == d
    assert excess_risk_mc(est, gen, 12, 200, seed=100) != a


def test_failures_are_counted():
    def flaky(rng):
        if rng.random() < 0.005:
            raise SingularDesign("boom")
        return 1.0

    values, failures = run_replicates(flaky, 2000, 0)
    assert failures + values.size == 2000 and failures > 0
    with pytest.raises(TooManyFailures):
        run_replicates(lambda r: (_ for _ in ()).throw(SingularDesign("x")), 10, 0)
    with pytest.raises(EmptyEstimate):
        run_replicates(lambda r: 0.0, 0, 0)


def test_infinite_risk_estimate():
    est = RiskEstimate.from_values([1.0, math.inf])
    assert est.mean == math.inf and math.isnan(est.std_err)


def test_student_t_noise_variance(rng):
    x = np.zeros((400000, 1))
    noise = StudentTNoise(5.0, 4.0)
    assert np.var(noise.sample(rng, x)) == pytest.approx(4.0, rel=0.03)
    het = HeteroscedasticNoise(lambda q: 1.0 + q[:, 0] ** 2)
    np.testing.assert_allclose(het.conditional_variance(np.array([[2.0]])), [5.0])


def test_sigma_gap_bounds_penalized_excess():
    # E[sigma gap] upper-bounds R(smp) - R(theta) - lam/2 |theta|^2 for every theta
    theta = np.array([1.5, -1.0])
    gen = LogisticGenerator(BoundedSphereDesign(2, 1.0), theta)
    n, lam = 20, 2.0 / 21
    comp = Comparator(theta, 0.5 * lam * theta @ theta)

    def one(rng):
        X, y = gen.sample(rng, n)
        smp = LogisticSMP(as_z(X, y), lam)
        x = gen.design.sample(rng, 1)[0]
        eta = gen.eta(x[None])[0]
        p = float(smp.predict(x).p_plus)
        loss = -(eta * math.log(p) + (1 - eta) * math.log1p(-p))
        ref = -(eta * log_sigmoid(x @ theta) + (1 - eta) * log_sigmoid(-(x @ theta)))
        return loss - ref - comp.penalty, smp.sigma_gap(x)

    pairs = np.array([one(np.random.default_rng([7, i])) for i in range(400)])
    diff = pairs[:, 1] - pairs[:, 0]
    se = diff.std(ddof=1) / math.sqrt(diff.size)
    assert diff.mean() >= -3 * se
    assert np.all(pairs[:, 1] >= 0)
