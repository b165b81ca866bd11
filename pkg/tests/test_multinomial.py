import math

import numpy as np
import pytest

from smp.errors import EmptySample
from smp.multinomial import (
    CategoricalDensity,
    multinomial_excess_risk_bound,
    multinomial_mle,
    multinomial_smp,
)
from smp.risk import kl_categorical


@pytest.mark.parametrize(
    "counts, expected",
    [((3, 1), (0.75, 0.25)), ((5, 0, 0), (1.0, 0.0, 0.0)), ((1, 1, 1, 1), (0.25,) * 4)],
)
def test_mle_examples(counts, expected):
    np.testing.assert_allclose(multinomial_mle(counts).probs, expected, rtol=1e-15)


def test_mle_needs_data():
    with pytest.raises(EmptySample):
        multinomial_mle([0, 0, 0])


@pytest.mark.parametrize(
    "counts, expected",
    [((0, 0, 0), (1 / 3,) * 3), ((3, 1), (4 / 6, 2 / 6)), ((20, 0), (21 / 22, 1 / 22))],
)
def test_smp_examples(counts, expected):
    np.testing.assert_allclose(multinomial_smp(counts).probs, expected, rtol=1e-15)


def test_bound_examples():
    assert multinomial_excess_risk_bound(0, 1) == 0.0
    assert multinomial_excess_risk_bound(20, 5) == pytest.approx(math.log(25 / 21), rel=1e-15)
    assert multinomial_excess_risk_bound(20, 5) == pytest.approx(0.174353, abs=5e-7)
    for n in range(1, 200):
        for d in (1, 2, 5, 50):
            assert multinomial_excess_risk_bound(n, d) <= (d - 1) / n + 1e-15


def test_smp_strictly_positive_mle_infinite_risk():
    counts = np.array([4, 0, 1])
    assert np.all(multinomial_smp(counts).probs > 0)
    mle = multinomial_mle(counts)
    assert mle.log_density(1) == -math.inf
    assert kl_categorical([0.5, 0.25, 0.25], mle) == math.inf


def test_point_mass_tightness_exact():
    # all n draws land on symbol 0: KL(delta_0 || smp) = -log((n+1)/(n+d))
    for n in (0, 1, 10, 50, 1000):
        for d in (1, 2, 5, 30):
            counts = np.zeros(d, dtype=int)
            counts[0] = n
            kl = kl_categorical(np.eye(d)[0], multinomial_smp(counts))
            assert kl == pytest.approx(multinomial_excess_risk_bound(n, d), rel=1e-12, abs=1e-15)


def test_categorical_density_validation():
    with pytest.raises(ValueError):
        CategoricalDensity(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        CategoricalDensity(np.array([1.5, -0.5]))
    assert CategoricalDensity(np.array([0.25, 0.75])).log_density(1) == pytest.approx(math.log(0.75))
