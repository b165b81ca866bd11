# coding: utf-8

# # Sample minmax predictors for two unconditional families
#
# For a finite alphabet the SMP is the Laplace estimator. For a Gaussian
# location family it keeps the sample mean and inflates the covariance by
# (1 + 1/n)^2.

import math

import numpy as np

from smp import location_minimax, location_mle, location_smp, multinomial_mle, multinomial_smp
from smp.generators import GaussianLocationGenerator, MultinomialGenerator
from smp.multinomial import multinomial_excess_risk_bound
from smp.risk import excess_risk_mc

# ## Counts in, smoothed probabilities out
#
# Symbols that were never observed still get mass 1/(n+d), which keeps the
# log-loss finite. The MLE gives them zero mass.

counts = np.array([7, 2, 1, 0, 0])
print("MLE:", multinomial_mle(counts).probs)
print("SMP:", multinomial_smp(counts).probs)

# ## Expected excess risk against the guarantee
#
# Under a uniform source the measured risk sits well below log((n+d)/(n+1)),
# the worst case reached by a point mass.

gen = MultinomialGenerator(np.full(5, 0.2))
for n in (5, 20, 80):
    est = excess_risk_mc(multinomial_smp, gen, n, 5000, seed=n)
    print(f"n={n:3d}  SMP excess {est.mean:.4f} +- {est.std_err:.1e}   "
          f"bound {multinomial_excess_risk_bound(n, 5):.4f}")

# ## Gaussian location under a wrong covariance
#
# The data have covariance 4I but the model assumes I. The plug-in MLE pays
# tr(Sigma^-1 Sigma_Y)/(2n); the flat-prior predictive keeps its constant risk.

d, n = 3, 10
gen = GaussianLocationGenerator(np.zeros(d), 4 * np.eye(d), np.eye(d))
for name, fn in [("mle", location_mle), ("smp", location_smp), ("minimax", location_minimax)]:
    est = excess_risk_mc(lambda Y, f=fn: f(Y, np.eye(d)), gen, n, 5000, seed=1)
    print(f"{name:8s} excess {est.mean:.4f} +- {est.std_err:.1e}")
print("constant minimax risk:", 0.5 * d * math.log1p(1 / n))
