"""Projection to strictly feasible form, second-order cone reductions, and
experimental-design builders.

The projection runs in two stages: first onto the range of the constraint
sum (which makes the projected constraint sum positive definite), then onto
the common nullspace of the constraints whose right-hand side is zero
(which removes them).  The reduced problem is strictly feasible on both
sides, and any reduced solution lifts back through the orthonormal basis
``B``: ``X = B Z B.T`` with objective and constraint values preserved.

When the objective matrix has rank one the whole problem collapses to a
second-order cone program over the factor vectors, and the same rewrite
covers combined problems with free variables via the hyperbolic identity
``|z|^2 <= a  <=>  |(2z; a-1)| <= a+1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analysis, linalg
from .conelp import ConeProgram, solve_cone_program, svec
from .errors import (DimensionMismatch, InfeasibleDesign, InfeasibleDual,
                     InfeasibleInput, InfeasiblePrimal, NonzeroH0, NonzeroR,
                     RankNotOne, UnboundedInput, WrongCriterion)
from .model import (CombinedProblem, Criterion, DesignProblem, PackingProblem)

ZERO_B_RTOL = 1e-12


# ---------------------------------------------------------------------------
# projection and lift


@dataclass(frozen=True)
class LiftMap:
    """Orthonormal map from the reduced space back to the original one."""

    basis: np.ndarray  # n x n'

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def n_reduced(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class ReducedProblem:
    """Strictly feasible projection of a packing problem.

    ``problem`` is ``None`` when the reduced space is empty (the original
    optimum is 0 and the zero matrix solves it).  ``kept`` indexes the
    surviving constraints in the original problem; ``zeroed`` the ones
    pinned to ``<M_i, X> = 0``; ``dropped`` the vacuous ones.

    ``strict_eps`` scales an interior witness (``eps * I`` is strictly
    feasible); ``dual_scale`` and ``dual_margin`` record a scalar multiple
    of the constraint sum that strictly dominates the objective and its
    margin (the margin is reported, not blindly asserted: it can shrink to
    roundoff level when the constraint sum is badly conditioned).
    """

    problem: PackingProblem | None
    kept: tuple[int, ...]
    zeroed: tuple[int, ...]
    dropped: tuple[int, ...]
    strict_eps: float
    dual_scale: float
    dual_margin: float

    @property
    def empty(self) -> bool:
        return self.problem is None


def project_packing(problem: PackingProblem) -> tuple[ReducedProblem, LiftMap]:
    """Project a feasible bounded packing problem to strictly feasible form."""
    ok, idx = analysis.check_feasible(problem)
    if not ok:
        raise InfeasibleInput(f"right-hand side {idx} is negative")
    cert = analysis.check_bounded(problem)
    if not cert.bounded:
        raise UnboundedInput("objective range leaves the constraint range",
                             ray=cert.ray)

    b = problem.b
    cut = ZERO_B_RTOL * max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    dropped = [i for i, m in enumerate(problem.mats) if linalg.rank_tol(m) == 0]
    zeroed = [i for i in range(problem.l)
              if i not in dropped and abs(b[i]) <= cut]
    kept = [i for i in range(problem.l)
            if i not in dropped and i not in zeroed]

    S = problem.mat_sum()
    if linalg.rank_tol(S) == problem.n:
        U = np.eye(problem.n)  # identity reduction when the sum has full rank
    else:
        U = linalg.range_basis(S)
    if U.shape[1] == 0:
        return _empty_reduction(kept, zeroed, dropped, problem.n)

    if zeroed:
        N = sum(U.T @ problem.mats[i] @ U for i in zeroed)
        V = linalg.null_basis(linalg.symmetrize(N))
        B = U @ V
    else:
        B = U
    if B.shape[1] == 0:
        return _empty_reduction(kept, zeroed, dropped, problem.n)

    mats_red, kept_final = [], []
    for i in kept:
        m = linalg.symmetrize(B.T @ problem.mats[i] @ B)
        if linalg.rank_tol(m) == 0:
            dropped.append(i)
        else:
            mats_red.append(m)
            kept_final.append(i)
    C_red = linalg.symmetrize(B.T @ problem.C @ B)
    if not kept_final:
        # every surviving direction is unconstrained; boundedness forces C'=0
        return _empty_reduction(kept_final, zeroed, sorted(dropped), problem.n)

    reduced = PackingProblem(C=C_red, mats=tuple(mats_red),
                             b=b[kept_final].copy())
    eps = 0.5 * float(np.min(reduced.b)) / max(
        1.0, max(float(np.trace(m)) for m in mats_red))
    lam_bar = analysis.dual_scalar_bound(reduced) + 1.0
    slack = lam_bar * reduced.mat_sum() - reduced.C
    margin = float(np.linalg.eigvalsh(slack)[0])
    return (ReducedProblem(problem=reduced, kept=tuple(kept_final),
                           zeroed=tuple(zeroed), dropped=tuple(sorted(dropped)),
                           strict_eps=eps, dual_scale=lam_bar,
                           dual_margin=margin),
            LiftMap(basis=B))


def _empty_reduction(kept, zeroed, dropped, n):
    red = ReducedProblem(problem=None, kept=tuple(kept), zeroed=tuple(zeroed),
                         dropped=tuple(dropped), strict_eps=0.0,
                         dual_scale=0.0, dual_margin=0.0)
    return red, LiftMap(basis=np.zeros((n, 0)))


def lift_solution(Z: np.ndarray, lift: LiftMap) -> np.ndarray:
    """Map a reduced solution back: ``X = B Z B.T``."""
    if lift.n_reduced == 0:
        return np.zeros((lift.n, lift.n))
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (lift.n_reduced, lift.n_reduced):
        raise DimensionMismatch(
            f"reduced solution is {Z.shape}, expected "
            f"({lift.n_reduced}, {lift.n_reduced})")
    return linalg.symmetrize(lift.basis @ Z @ lift.basis.T)


def embed_dual(reduced: ReducedProblem, mu_reduced: np.ndarray, l: int) -> np.ndarray:
    """Place reduced dual multipliers at their original indices (zeros
    elsewhere)."""
    mu = np.zeros(l)
    for j, i in enumerate(reduced.kept):
        mu[i] = mu_reduced[j]
    return mu


# ---------------------------------------------------------------------------
# second-order cone forms


@dataclass(frozen=True)
class SocCon:
    """One cone constraint ``|F u + g| <= f . u + d``."""

    F: np.ndarray
    g: np.ndarray
    f: np.ndarray
    d: float


@dataclass(frozen=True)
class SocpProblem:
    """Linear objective over second-order cone constraints.

    Optional ``lin_ineq = (A, e)`` adds ``A u <= e`` rows and
    ``lin_eq = (B, r)`` adds ``B u = r`` rows.  ``sense`` is "max" or "min".
    """

    objective: np.ndarray
    cones: tuple[SocCon, ...]
    lin_ineq: tuple[np.ndarray, np.ndarray] | None = None
    lin_eq: tuple[np.ndarray, np.ndarray] | None = None
    sense: str = "max"

    @property
    def nvars(self) -> int:
        return self.objective.shape[0]

    def __post_init__(self):
        nv = self.objective.shape[0]
        for i, con in enumerate(self.cones):
            if con.F.shape[1] != nv or con.f.shape[0] != nv \
                    or con.F.shape[0] != con.g.shape[0]:
                raise DimensionMismatch(f"cone constraint {i} is inconsistent")
        if self.lin_ineq is not None and self.lin_ineq[0].shape[1] != nv:
            raise DimensionMismatch("inequality rows do not match variables")
        if self.lin_eq is not None and self.lin_eq[0].shape[1] != nv:
            raise DimensionMismatch("equality rows do not match variables")
        if self.sense not in ("max", "min"):
            raise ValueError(f"sense must be 'max' or 'min', got {self.sense!r}")


def rank_one_vector(C: np.ndarray) -> np.ndarray:
    """Factor a numerically rank-one PSD matrix as ``c c^T`` and return ``c``
    with its first nonzero entry positive."""
    if linalg.rank_tol(C) != 1:
        raise RankNotOne(f"objective matrix has rank {linalg.rank_tol(C)}, not 1")
    dec = linalg.eigh_desc(C)
    c = np.sqrt(dec.eigenvalues[0]) * dec.eigenvectors[:, 0]
    nz = np.flatnonzero(np.abs(c) > 1e-12 * np.max(np.abs(c)))
    if nz.size and c[nz[0]] < 0:
        c = -c
    return c


def to_socp_rank1(problem: PackingProblem) -> SocpProblem:
    """Rewrite a rank-one-objective packing problem as
    ``max c.x  s.t.  |A_i x| <= sqrt(b_i)`` with ``A_i.T A_i = M_i``.

    Meant to run after :func:`project_packing` so every ``b_i`` is positive;
    right-hand sides are clamped at zero before the square root to guard
    against roundoff.
    """
    ok, idx = analysis.check_feasible(problem)
    if not ok:
        raise InfeasibleInput(f"right-hand side {idx} is negative")
    c = rank_one_vector(problem.C)
    n = problem.n
    cones = []
    for m, bi in zip(problem.mats, problem.b):
        A = linalg.psd_factor(m)
        cones.append(SocCon(F=A, g=np.zeros(A.shape[0]), f=np.zeros(n),
                            d=float(np.sqrt(max(bi, 0.0)))))
    return SocpProblem(objective=c, cones=tuple(cones))


def _phase1_lambda(H: np.ndarray, b: np.ndarray) -> tuple[bool, np.ndarray]:
    """Feasibility of ``H^T lam + b >= 0``: maximize the worst slack
    (capped at 1) and test its sign."""
    q, l = H.shape
    if q == 0:
        return bool(np.min(b) >= -1e-9), np.zeros(0)
    # variables (lam, s): max s  s.t.  s - H^T lam <= b, s <= 1
    c = np.zeros(q + 1)
    c[-1] = -1.0
    G = np.zeros((l + 1, q + 1))
    G[:l, :q] = -H.T
    G[:l, q] = 1.0
    G[l, q] = 1.0
    h = np.r_[b, 1.0]
    res = solve_cone_program(ConeProgram(c=c, G=G, h=h, cones=[("nn", l + 1)]),
                             reltol=1e-9)
    if not res.optimal:
        return False, np.zeros(q)
    return bool(-res.pcost >= -1e-9), res.x[:q]


def _phase1_dual(mats, C, H, h0) -> tuple[bool, np.ndarray]:
    """Feasibility of ``sum mu_i M_i >= C, H mu = -h0, mu >= 0`` via the
    strictly feasible relaxation ``min t: sum mu_i M_i + t I >= C``."""
    l = len(mats)
    n = C.shape[0]
    q = H.shape[0]
    L = svec(np.eye(n)).shape[0]
    # variables (mu, t)
    c = np.zeros(l + 1)
    c[-1] = 1.0
    G_nn = np.zeros((l + 1, l + 1))
    G_nn[:l, :l] = -np.eye(l)
    G_nn[l, l] = -1.0          # t >= -1 keeps the relaxation bounded
    h_nn = np.r_[np.zeros(l), 1.0]
    G_psd = np.zeros((L, l + 1))
    for i, m in enumerate(mats):
        G_psd[:, i] = -svec(m)
    G_psd[:, l] = -svec(np.eye(n))
    h_psd = -svec(np.asarray(C, float))
    G = np.vstack([G_nn, G_psd])
    h = np.r_[h_nn, h_psd]
    A = np.hstack([H, np.zeros((q, 1))]) if q else None
    beq = -np.asarray(h0, float) if q else None
    res = solve_cone_program(ConeProgram(c=c, G=G, h=h,
                                         cones=[("nn", l + 1), ("psd", n)],
                                         A=A, b=beq),
                             reltol=1e-9)
    if res.status == "primal_infeasible":
        return False, np.zeros(l)
    if not res.optimal:
        return False, np.zeros(l)
    t = res.x[-1]
    return bool(t <= 1e-7 * max(1.0, float(np.linalg.norm(C)))), res.x[:l]


def combined_to_socp(problem: CombinedProblem) -> SocpProblem:
    """Rewrite a combined problem with rank-one objective, zero coupling
    matrices, and zero free-variable objective as a cone program in
    ``(x, lam)`` via the hyperbolic identity.

    The optimal value of the combined problem is the square of the cone
    program's value, and ``(x x^T, lam)`` solves the original.
    """
    if problem.p and (np.max(np.abs(problem.R0)) > 0
                      or any(np.max(np.abs(r)) > 0 for r in problem.Rs)):
        raise NonzeroR("coupling matrices must vanish for this reduction")
    if problem.q and float(np.max(np.abs(problem.h0))) > 0:
        raise NonzeroH0("free-variable objective must vanish for this reduction")
    c = rank_one_vector(problem.C)

    ok, _ = _phase1_lambda(problem.H, problem.b)
    if not ok:
        raise InfeasiblePrimal("no free variables make every right-hand side "
                               "nonnegative")
    ok, _ = _phase1_dual(problem.mats, problem.C, problem.H, problem.h0)
    if not ok:
        raise InfeasibleDual("no nonnegative multipliers dominate the objective "
                             "matrix under the linear constraints")

    n, q = problem.n, problem.q
    nv = n + q
    cones = []
    for m, bi, hi in zip(problem.mats, problem.b, problem.hs):
        A = linalg.psd_factor(m)
        k = A.shape[0]
        F = np.zeros((k + 1, nv))
        F[:k, :n] = 2.0 * A
        F[k, n:] = hi
        g = np.r_[np.zeros(k), bi - 1.0]
        f = np.r_[np.zeros(n), hi]
        cones.append(SocCon(F=F, g=g, f=f, d=float(bi) + 1.0))
    objective = np.r_[c, np.zeros(q)]
    return SocpProblem(objective=objective, cones=tuple(cones))


# ---------------------------------------------------------------------------
# experimental-design builders


def build_c_optimal(design: DesignProblem) -> PackingProblem:
    """Packing form of single-functional design: ``max c.X c`` under unit
    budgets; the optimal value is the minimal estimator variance."""
    if design.criterion is not Criterion.C_OPT:
        raise WrongCriterion(f"expected criterion 'c', got {design.criterion.value!r}")
    c = design.K[:, 0]
    return PackingProblem(C=linalg.symmetrize(np.outer(c, c)),
                          mats=design.mats, b=np.ones(design.l))


def build_a_optimal(design: DesignProblem) -> PackingProblem:
    """Trace-criterion design as a packing problem of dimension ``r n``:
    block-diagonal constraint matrices and the stacked functionals as a
    rank-one objective, so the cone reduction applies."""
    r = design.r
    c_stack = design.K.flatten(order="F")
    mats = tuple(linalg.symmetrize(np.kron(np.eye(r), m)) for m in design.mats)
    return PackingProblem(C=linalg.symmetrize(np.outer(c_stack, c_stack)),
                          mats=mats, b=np.ones(design.l))


def build_e_optimal(design: DesignProblem) -> PackingProblem:
    """Extreme-eigenvalue design: objective ``K K^T`` of rank ``r`` under unit
    budgets; a solution of rank at most ``r`` exists."""
    return PackingProblem(C=linalg.symmetrize(design.K @ design.K.T),
                          mats=design.mats, b=np.ones(design.l))


@dataclass(frozen=True)
class ResourceSocpPair:
    """Primal/dual cone programs of a resource-constrained design.

    Dual variables are laid out ``[mu (l), t, alpha (l), z_1, ..., z_l]``;
    the design weights are recovered as ``w = mu / t``.
    """

    primal: SocpProblem
    dual: SocpProblem
    l: int
    obs_rows: tuple[int, ...]


def build_resource_constrained(design: DesignProblem) -> ResourceSocpPair:
    """Cone-program pair for single-functional design under resource
    constraints ``P w <= d``.

    The primal runs in ``(x, lam)`` with hyperbolic cone rows per
    experiment; the dual carries the multipliers ``mu`` whose ratio to the
    scalar ``t`` reproduces the optimal allocation.  The squared primal
    value equals the minimal variance.
    """
    if design.criterion is not Criterion.C_OPT:
        raise WrongCriterion(f"expected criterion 'c', got {design.criterion.value!r}")
    if design.resource is None:
        raise InfeasibleDesign("design carries no resource block")
    P, d = design.resource.P, design.resource.d
    c = design.K[:, 0]
    l, n, q = design.l, design.n, P.shape[0]

    # strictly positive allocation satisfying P w <= d
    cv = np.zeros(l + 1)
    cv[-1] = -1.0
    G = np.zeros((q + l + 1, l + 1))
    G[:q, :l] = P
    G[q:q + l, :l] = -np.eye(l)
    G[q:q + l, l] = 1.0
    G[q + l, l] = 1.0
    h = np.r_[d, np.zeros(l), 1.0]
    res = solve_cone_program(ConeProgram(c=cv, G=G, h=h, cones=[("nn", q + l + 1)]),
                             reltol=1e-9)
    if not res.optimal or -res.pcost <= 1e-9:
        raise InfeasibleDesign("no strictly positive allocation satisfies the "
                               "resource constraints")
    S = linalg.symmetrize(sum(design.mats))
    U = linalg.range_basis(S)
    resid = c - U @ (U.T @ c)
    if np.linalg.norm(resid) > 1e-8 * max(1.0, np.linalg.norm(c)):
        raise InfeasibleDesign("target functional is not estimable by the "
                               "available experiments")

    obs = [design.observation(i) for i in range(l)]
    obs_rows = tuple(a.shape[0] for a in obs)

    # primal: variables (x, lam)
    nv = n + q
    cones = []
    for i, a in enumerate(obs):
        k = a.shape[0]
        F = np.zeros((k + 1, nv))
        F[:k, :n] = 2.0 * a
        F[k, n:] = P[:, i]
        g = np.r_[np.zeros(k), -1.0]
        f = np.r_[np.zeros(n), P[:, i]]
        cones.append(SocCon(F=F, g=g, f=f, d=1.0))
    A_ub = np.zeros((1 + q, nv))
    A_ub[0, n:] = d
    A_ub[1:, n:] = -np.eye(q)
    e_ub = np.r_[1.0, np.zeros(q)]
    primal = SocpProblem(objective=np.r_[c, np.zeros(q)], cones=tuple(cones),
                         lin_ineq=(A_ub, e_ub))

    # dual: variables (mu, t, alpha, z_1..z_l)
    nz = sum(obs_rows)
    nd = l + 1 + l + nz
    obj = np.zeros(nd)
    obj[l] = 1.0
    obj[l + 1:2 * l + 1] = 1.0
    B = np.zeros((n, nd))
    pos = 2 * l + 1
    starts = []
    for i, a in enumerate(obs):
        k = a.shape[0]
        starts.append(pos)
        B[:, pos:pos + k] = a.T
        pos += k
    r_eq = c.copy()
    rows = []
    A1 = np.zeros((q, nd))
    A1[:, :l] = P
    A1[:, l] = -d
    rows.append((A1, np.zeros(q)))
    A2 = np.zeros((2 * l + 1, nd))
    A2[:l, :l] = -np.eye(l)
    A2[l, l] = -1.0
    A2[l + 1:, l + 1:2 * l + 1] = -np.eye(l)
    rows.append((A2, np.zeros(2 * l + 1)))
    A_ub_d = np.vstack([r[0] for r in rows])
    e_ub_d = np.concatenate([r[1] for r in rows])
    dcones = []
    for i, (a, start) in enumerate(zip(obs, starts)):
        k = a.shape[0]
        F = np.zeros((k + 1, nd))
        F[:k, start:start + k] = np.eye(k)
        F[k, l + 1 + i] = 1.0
        F[k, i] = -1.0
        f = np.zeros(nd)
        f[l + 1 + i] = 1.0
        f[i] = 1.0
        dcones.append(SocCon(F=F, g=np.zeros(k + 1), f=f, d=0.0))
    dual = SocpProblem(objective=obj, cones=tuple(dcones),
                       lin_ineq=(A_ub_d, e_ub_d), lin_eq=(B, r_eq),
                       sense="min")
    return ResourceSocpPair(primal=primal, dual=dual, l=l, obs_rows=obs_rows)
