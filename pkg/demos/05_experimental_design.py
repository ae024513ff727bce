"""Optimal experimental design through packing problems.

Allocating effort w_i to experiments with information matrices M_i makes
the estimator covariance K^T (sum w_i M_i)^+ K.  Minimizing its value on a
single functional (criterion "c"), its trace ("a"), or its largest
eigenvalue ("e") are all packing problems; the optimal design is read off
the packing multipliers, and resource constraints P w <= d only move the
problem to a cone-program pair whose dual carries the weights.
"""

import numpy as np

from sdpack import reduce as rd
from sdpack.model import Criterion, DesignProblem, ResourceBlock
from sdpack.solve import recover_design, solve_packing_lowrank, solve_socp

M1, M2 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])

# estimate theta_1 + theta_2 from two orthogonal unit probes
design = DesignProblem(K=np.array([[1.0], [1.0]]), criterion=Criterion.C_OPT,
                       mats=(M1, M2))
prob = rd.build_c_optimal(design)
sol = solve_packing_lowrank(prob)
w = recover_design(sol.mu, prob.b)
print("single-functional design: variance", round(sol.objective, 6),
      " weights", np.round(w, 4))

# estimate both coordinates, trace criterion: stacked rank-one objective
designA = DesignProblem(K=np.eye(2), criterion=Criterion.A_OPT, mats=(M1, M2))
probA = rd.build_a_optimal(designA)
solA = solve_packing_lowrank(probA)
print("trace criterion: value", round(solA.objective, 6),
      " weights", np.round(recover_design(solA.mu, probA.b), 4),
      " route", solA.route)

# extreme-eigenvalue criterion: rank-2 objective, rank-2 solution
designE = DesignProblem(K=np.eye(2), criterion=Criterion.E_OPT, mats=(M1, M2))
probE = rd.build_e_optimal(designE)
solE = solve_packing_lowrank(probE)
print("extreme-eigenvalue criterion: value", round(solE.objective, 6),
      " solution rank", solE.numerical_rank)

# per-experiment caps instead of a unit budget
designR = DesignProblem(K=np.array([[1.0], [1.0]]), criterion=Criterion.C_OPT,
                        mats=(M1, M2),
                        resource=ResourceBlock(P=np.eye(2), d=np.ones(2)))
pair = rd.build_resource_constrained(designR)
primal = solve_socp(pair.primal)
dual = solve_socp(pair.dual)
mu, t = dual.x[:pair.l], float(dual.x[pair.l])
w = recover_design(mu, mode="resource", t=t)
print("\nresource-capped design:")
print("   cone value", round(primal.value, 8),
      "-> variance", round(primal.value ** 2, 6))
print("   duality gap", abs(primal.value - dual.value))
print("   weights w = mu / t =", np.round(w, 6))
print("   caps respected:", bool(np.all(designR.resource.P @ w
                                        <= designR.resource.d + 1e-8)))
