"""Feasibility and boundedness certificates for packing problems.

A packing problem  max <C, X>  s.t.  <M_i, X> <= b_i,  X PSD  is feasible
exactly when every b_i is nonnegative (X = 0 witnesses it), and a feasible
one is bounded exactly when the range of C sits inside the range of
sum(M_i).  Both answers come with machine-checkable certificates: a scalar
multiple of the constraint sum that dominates C, or a ray along which the
objective grows without bound.
"""

import numpy as np

from sdpack import analysis, linalg
from sdpack.model import PackingProblem

# a bounded instance: estimating theta_1 + theta_2 from two unit probes
c = np.array([1.0, 1.0])
prob = PackingProblem(C=np.outer(c, c),
                      mats=(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])),
                      b=np.array([1.0, 1.0]))

feasible, bad = analysis.check_feasible(prob)
print("feasible:", feasible)

cert = analysis.check_bounded(prob)
print("bounded:", cert.bounded)
print("scalar dual bound lambda:", cert.lam)
slack = cert.lam * prob.mat_sum() - prob.C
print("lambda * sum(M) - C is PSD:", linalg.is_psd(slack)[0])

# a-priori bounds that need no solve at all
print("guaranteed solution rank for l=2 constraints:",
      analysis.barvinok_pataki(prob.l))
gap = analysis.nrt_bound(prob)
print(f"best rank-one value is within factor {gap.factor:.4f} of the optimum")

# an unbounded instance: the objective lives in the constraints' blind spot
unb = PackingProblem(C=np.diag([1.0, 0.0]),
                     mats=(np.diag([0.0, 1.0]),),
                     b=np.array([1.0]))
cert = analysis.check_bounded(unb)
print("\nsecond instance bounded:", cert.bounded)
h = cert.ray
print("certificate ray h:", h)
print("constraint value on the ray  <M, h h^T> =", h @ unb.mats[0] @ h)
print("objective value on the ray   <C, h h^T> =", h @ unb.C @ h)
print("so alpha * h h^T stays feasible with objective ~ alpha")
