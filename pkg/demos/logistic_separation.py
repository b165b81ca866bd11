# coding: utf-8

# # Logistic SMP on separated data
#
# With two points that can be separated the MLE does not exist. The SMP
# still predicts: it refits with each candidate label for the query and
# normalizes the two likelihoods.

import numpy as np

from smp import LogisticSMP, separation_check
from smp.logistic import as_z

X = np.array([[-1.0, 0.0], [0.0, -1.0]])
y = np.array([-1.0, -1.0])
Z = as_z(X, y)
print("separated:", separation_check(Z).separated)

smp = LogisticSMP(Z, lam=0.0)
for q in ([1.0, 1.0], [-1.0, -1.0], [2.0, -1.0]):
    print(f"x={q}: P(y=+1) = {float(smp.predict(np.array(q)).p_plus):.4f}")

# Write z_i = -y_i x_i. Queries in the cone spanned by the z_i get
# P(y=+1) in (0, 1/2), queries in the opposite cone get it in (1/2, 1), and
# queries outside both cones get exactly 1/2. Here both points carry label
# -1, so (1, 1), opposite to them, leans towards +1.

# ## Adding a penalty
#
# With lam > 0 both refits are strongly convex and stay close to each other,
# which is what drives the (e d + B^2 R^2)/n guarantee.

smp = LogisticSMP(Z, lam=0.5)
print("penalized:", smp.predict(np.array([[1.0, 1.0], [2.0, -1.0]])).p_plus)
print("sigma gap:", smp.sigma_gap(np.array([1.0, 1.0])))
