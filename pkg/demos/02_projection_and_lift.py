"""Projecting a packing problem to strictly feasible form.

Zero right-hand sides pin the solution to the common nullspace of their
constraint matrices, and a rank-deficient constraint sum leaves dead
directions; projecting both away yields an equivalent problem that is
strictly feasible on the primal and the dual side.  Solutions map back
through an orthonormal basis with objective and constraint values intact.
"""

import numpy as np

from sdpack import reduce as rd
from sdpack.model import PackingProblem

# a 3x3 instance: one zero-budget constraint plus two ordinary ones
prob = PackingProblem(
    C=np.array([[0.5, 0.0, 0.5], [0.0, 0.2, 0.0], [0.5, 0.0, 1.0]]),
    mats=(np.diag([1.0, 0.0, 0.0]),      # budget 0: forces X off e1
          np.eye(3),
          np.diag([0.5, 1.0, 2.0])),
    b=np.array([0.0, 1.0, 1.5]))

red, lift = rd.project_packing(prob)
inner = red.problem
print("original dimension:", prob.n, "-> reduced dimension:", inner.n)
print("constraints kept:", red.kept, " pinned to zero:", red.zeroed)
print("orthonormal lift basis:\n", np.round(lift.basis, 6))

# the reduction is strictly feasible on both sides, with witnesses
print("\nstrict primal witness: eps =", red.strict_eps)
for m, bi in zip(inner.mats, inner.b):
    print(f"   <M', eps I> = {red.strict_eps * np.trace(m):.4f} < {bi}")
print(f"strict dual witness: {red.dual_scale:.4f} * sum(M') - C' has "
      f"min eigenvalue {red.dual_margin:.4f} > 0")

# lift a reduced feasible point and compare values
Z = 0.4 * np.eye(inner.n)
X = rd.lift_solution(Z, lift)
print("\nreduced objective:", np.trace(inner.C @ Z))
print("lifted objective:  ", np.trace(prob.C @ X))
print("pinned constraint value after lift:", np.trace(prob.mats[0] @ X))

# projecting twice changes nothing
red2, lift2 = rd.project_packing(inner)
print("\nre-projection is the identity:",
      np.allclose(lift2.basis, np.eye(inner.n)))
