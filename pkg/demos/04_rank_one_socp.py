"""Rank-one objectives collapse to second-order cone programs.

When C = c c^T, writing X = x x^T turns  max <C, X>  into  max c.x  under
norm constraints |A_i x| <= sqrt(b_i) with A_i.T A_i = M_i.  The cone
program is much cheaper than the semidefinite one, its solution lifts back
as X = x x^T, and its cone multipliers map to the packing multipliers
mu_i = (c.x) z_i0 / sqrt(b_i).
"""

import numpy as np

from sdpack import reduce as rd
from sdpack.model import PackingProblem
from sdpack.solve import kkt_check, solve_packing_lowrank, solve_sdp, solve_socp

rng = np.random.default_rng(11)
n, l = 5, 4
mats = []
for _ in range(l):
    B = rng.standard_normal((n, n))
    mats.append(B @ B.T + 0.05 * np.eye(n))
c = rng.standard_normal(n)
prob = PackingProblem(C=np.outer(c, c), mats=tuple(mats),
                      b=rng.uniform(0.5, 2.0, l))

# the explicit cone program
socp = rd.to_socp_rank1(prob)
res = solve_socp(socp)
print("cone-program value c.x =", res.value)
print("squared:", res.value ** 2)

oracle = solve_sdp(prob)
print("dense oracle value:     ", oracle.objective)

# the full pipeline does the same and maps the multipliers back
sol = solve_packing_lowrank(prob)
print("\npipeline route:", sol.route)
print("solution rank:", sol.numerical_rank)
residuals, ok = kkt_check(prob, sol.X, sol.mu, 1e-6)
print("multiplier map verifies at 1e-6:", ok)
print("residuals:", residuals)

# x and -x are both optimal; the sign convention picks c.x >= 0 for the
# factor vector extracted from C (which may be the negative of the raw c)
x = res.x
print("\nc.x >= 0 convention:", socp.objective @ x >= 0)
