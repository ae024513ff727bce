"""Solvers: cone-program fronts, the low-rank packing pipeline, the
trace-cap path for combined problems, optimality verification, and
design-weight recovery.

The packing pipeline projects to strictly feasible form first, then either
collapses to a second-order cone program (rank-one objective) or follows a
constraint-perturbation path ``M_i + eps I`` with a decreasing ``eps``
schedule and warm starts: with ``eps > 0`` every optimal matrix has rank at
most that of the objective, and the path values increase monotonically to
the unperturbed optimum.  Combined problems go through a trace-cap path
``cap * (tr X + tr Y) <= 1`` instead, whose values decrease to the supremum
from below as the cap loosens; an unattained supremum shows up as iterate
norms diverging while the values converge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import linalg, reduce as reduction
from .analysis import check_bounded, check_feasible
from .conelp import (ConeProgram, ConeResult, smat, solve_cone_program, svec,
                     svec_dim)
from .errors import (InfeasibleDual, InfeasibleInput, InfeasiblePrimal,
                     InvalidInput, MaxIterations, NumericalFailure,
                     PathDiverged, PathNotMonotone, UnboundedInput, ZeroDual)
from .model import (CombinedProblem, CombinedSolution, KktResiduals,
                    PackingProblem, Solution, Status)

# tighter targets for path solves: the monotonicity checks compare
# consecutive values at 1e-9, so per-solve noise must sit well below that
_PATH_RELTOL = 1e-11
_PATH_FEASTOL = 1e-9
_MONOTONE_SLACK = 1e-9


def _geometric(start: float, stop: float, count: int) -> tuple[float, ...]:
    return tuple(float(v) for v in np.geomspace(start, stop, count))


@dataclass(frozen=True)
class SolveOptions:
    """Solver settings shared by every routine in this module."""

    tol: float = 1e-8
    max_iter: int = 200
    eps_schedule: tuple[float, ...] = _geometric(1e-2, 1e-8, 7)
    eta_schedule: tuple[float, ...] = _geometric(1.0, 1e-6, 7)
    rank_threshold: float = 1e-6

    def __post_init__(self):
        for name in ("eps_schedule", "eta_schedule"):
            sched = np.asarray(getattr(self, name), dtype=float)
            if sched.size == 0 or np.any(sched <= 0) \
                    or np.any(np.diff(sched) >= 0):
                raise InvalidInput(f"{name} must be strictly decreasing and "
                                   "positive")
        if self.tol <= 0 or self.rank_threshold <= 0 or self.max_iter < 1:
            raise InvalidInput("tol, rank_threshold, max_iter must be positive")


@dataclass(frozen=True)
class SolveReport:
    """Numerical summary of one solve."""

    primal: float
    dual: float
    gap: float
    iterations: int
    status: Status
    kkt: KktResiduals | None = None


@dataclass(frozen=True)
class SocpResult:
    """Solution of a :class:`~sdpack.reduce.SocpProblem`."""

    x: np.ndarray
    value: float
    cone_duals: tuple[tuple[float, np.ndarray], ...]  # (scalar, vector) per cone
    ineq_duals: np.ndarray
    eq_duals: np.ndarray
    report: SolveReport
    ray: np.ndarray | None = None


# ---------------------------------------------------------------------------
# KKT verification


def kkt_scale(problem: PackingProblem, X: np.ndarray, mu: np.ndarray) -> float:
    return max(1.0, float(np.linalg.norm(problem.C)),
               float(np.max(np.abs(problem.b))) if problem.b.size else 0.0,
               float(np.linalg.norm(X)),
               float(np.max(np.abs(mu))) if mu.size else 0.0)


def kkt_check(problem: PackingProblem, X: np.ndarray, mu: np.ndarray,
              tol: float = 1e-6) -> tuple[KktResiduals, bool]:
    """Max-norm residuals of primal feasibility, dual feasibility, and
    complementary slackness; passes when all are below ``tol`` times the
    problem scale."""
    X = linalg.symmetrize(X)
    mu = np.asarray(mu, dtype=float)
    if X.shape[0] != problem.n or mu.shape[0] != problem.l:
        raise InvalidInput("solution dimensions do not match the problem")
    traces = np.array([float(np.trace(m @ X)) for m in problem.mats])
    primal = max(0.0, float(np.max(traces - problem.b)),
                 -float(np.linalg.eigvalsh(X)[0]))
    slack = linalg.symmetrize(
        sum(m * M for m, M in zip(mu, problem.mats)) - problem.C)
    dual = max(0.0, -float(np.linalg.eigvalsh(slack)[0]),
               -float(np.min(mu)) if mu.size else 0.0)
    comp = max(float(np.max(np.abs(slack @ X))),
               float(np.max(np.abs(mu * (problem.b - traces)))))
    res = KktResiduals(primal=primal, dual=dual, complementarity=comp)
    return res, res.passes(tol, kkt_scale(problem, X, mu))


# ---------------------------------------------------------------------------
# cone-program fronts


def _socp_to_cone_program(socp: reduction.SocpProblem) -> tuple[ConeProgram, int]:
    nv = socp.nvars
    blocks, G_rows, h_rows = [], [], []
    n_ineq = 0
    if socp.lin_ineq is not None:
        A_ub, e_ub = socp.lin_ineq
        n_ineq = A_ub.shape[0]
        blocks.append(("nn", n_ineq))
        G_rows.append(A_ub)
        h_rows.append(e_ub)
    for con in socp.cones:
        k = con.F.shape[0]
        blocks.append(("soc", k + 1))
        G_rows.append(-np.vstack([con.f[None, :], con.F]))
        h_rows.append(np.r_[con.d, con.g])
    G = np.vstack(G_rows)
    h = np.concatenate(h_rows)
    c = -socp.objective if socp.sense == "max" else socp.objective.copy()
    A, b = (socp.lin_eq if socp.lin_eq is not None else (None, None))
    prog = ConeProgram(c=c, G=G, h=h, cones=blocks, A=A, b=b)
    return prog, n_ineq


def _report_from_cone(res: ConeResult, status: Status, sense: str) -> SolveReport:
    sign = -1.0 if sense == "max" else 1.0
    return SolveReport(primal=sign * res.pcost, dual=sign * res.dcost,
                       gap=res.gap, iterations=res.iterations, status=status,
                       kkt=KktResiduals(primal=res.pres, dual=res.dres,
                                        complementarity=res.relgap))


def solve_socp(socp: reduction.SocpProblem,
               opts: SolveOptions | None = None) -> SocpResult:
    """Solve a second-order cone problem.

    Statuses: optimal (gap below ``opts.tol``), unbounded (with an improving
    ray), infeasible, or near-unattained (bounded value whose supremum the
    iterates cannot reach).  Iteration-limit and breakdown cases raise
    ``MaxIterations`` / ``NumericalFailure``.
    """
    opts = opts or SolveOptions()
    prog, n_ineq = _socp_to_cone_program(socp)
    res = solve_cone_program(prog, reltol=opts.tol, max_iter=opts.max_iter)
    sign = -1.0 if socp.sense == "max" else 1.0

    if res.status == "primal_infeasible":
        return SocpResult(x=np.zeros(socp.nvars), value=math.nan,
                          cone_duals=(), ineq_duals=np.zeros(n_ineq),
                          eq_duals=np.zeros(0),
                          report=_report_from_cone(res, Status.INFEASIBLE,
                                                   socp.sense))
    if res.status == "dual_infeasible":
        return SocpResult(x=np.zeros(socp.nvars), value=math.inf,
                          cone_duals=(), ineq_duals=np.zeros(n_ineq),
                          eq_duals=np.zeros(0),
                          report=_report_from_cone(res, Status.UNBOUNDED,
                                                   socp.sense),
                          ray=res.ray if socp.sense == "min" else
                          (None if res.ray is None else res.ray.copy()))
    if res.status == "near_unattained":
        status = Status.NEAR_UNATTAINED
    elif res.status == "optimal":
        status = Status.OPTIMAL
    elif res.status == "max_iterations":
        # bounded value but diverging iterates with an otherwise-clean stop
        # means the supremum is not attained by any finite point
        scale = 1.0 + float(np.linalg.norm(prog.h)) \
            + (float(np.linalg.norm(prog.b)) if prog.b is not None else 0.0)
        diverged = (res.x is not None
                    and float(np.linalg.norm(res.x, np.inf)) > 1e4 * scale)
        clean = (res.relgap <= 1e3 * opts.tol and res.pres <= 1e2 * opts.tol
                 and res.dres <= 1e2 * opts.tol)
        if diverged and clean:
            status = Status.NEAR_UNATTAINED
        else:
            raise MaxIterations("iteration limit before convergence",
                                best=_socp_result(socp, res, n_ineq,
                                                  Status.MAX_ITERATIONS))
    else:
        raise NumericalFailure("interior-point breakdown in the cone solver")
    return _socp_result(socp, res, n_ineq, status)


def _socp_result(socp, res, n_ineq, status) -> SocpResult:
    x = res.x
    value = float(socp.objective @ x)
    ineq_duals = res.z[:n_ineq].copy()
    cone_duals = []
    pos = n_ineq
    for con in socp.cones:
        k = con.F.shape[0] + 1
        zc = res.z[pos:pos + k]
        cone_duals.append((float(zc[0]), zc[1:].copy()))
        pos += k
    eq_duals = res.y.copy() if res.y is not None else np.zeros(0)
    return SocpResult(x=x.copy(), value=value, cone_duals=tuple(cone_duals),
                      ineq_duals=ineq_duals, eq_duals=eq_duals,
                      report=_report_from_cone(res, status, socp.sense))


def _packing_cone_program(C, mats, b, eps: float = 0.0) -> ConeProgram:
    n = C.shape[0]
    L = svec_dim(n)
    l = len(mats)
    eye = np.eye(n)
    G = np.vstack([np.array([svec(m + eps * eye) for m in mats]),
                   -np.eye(L)])
    h = np.r_[np.asarray(b, float), np.zeros(L)]
    return ConeProgram(c=-svec(C), G=G, h=h, cones=[("nn", l), ("psd", n)])


def _solve_packing_direct(problem: PackingProblem, opts: SolveOptions,
                          reltol: float | None = None,
                          warm=None) -> tuple[ConeResult, np.ndarray, np.ndarray]:
    """One interior-point solve of a packing problem; returns the engine
    result plus (X, mu)."""
    prog = _packing_cone_program(problem.C, problem.mats, problem.b)
    res = solve_cone_program(prog, reltol=reltol or opts.tol,
                             max_iter=opts.max_iter, warm=warm)
    if res.x is None:
        raise NumericalFailure("cone solver returned no iterate")
    X = linalg.symmetrize(smat(res.x, problem.n))
    mu = np.clip(res.z[:problem.l], 0.0, None)
    return res, X, mu


def solve_dual_packing(problem: PackingProblem,
                       opts: SolveOptions | None = None) -> tuple[np.ndarray, float]:
    """Solve ``min b.mu  s.t.  sum mu_i M_i >= C, mu >= 0`` directly."""
    opts = opts or SolveOptions()
    l, n = problem.l, problem.n
    G = np.zeros((l + svec_dim(n), l))
    G[:l, :l] = -np.eye(l)
    for i, m in enumerate(problem.mats):
        G[l:, i] = -svec(m)
    h = np.r_[np.zeros(l), -svec(problem.C)]
    prog = ConeProgram(c=problem.b.copy(), G=G, h=h,
                       cones=[("nn", l), ("psd", n)])
    res = solve_cone_program(prog, reltol=opts.tol, max_iter=opts.max_iter)
    if res.status not in ("optimal", "max_iterations") or res.x is None:
        raise NumericalFailure(f"dual solve ended with {res.status}")
    return np.clip(res.x, 0.0, None), float(res.pcost)


def solve_sdp(problem, opts: SolveOptions | None = None):
    """Dense interior-point oracle.

    For a :class:`PackingProblem` this solves the problem and its dual in
    one sweep, returning a full :class:`Solution`; infeasibility and
    unboundedness are decided by the exact certificates first.  When the
    constraint sum is rank deficient the solve runs in a rotated basis of
    its range (an exact transformation that restores dual interiority).  A
    raw :class:`~sdpack.conelp.ConeProgram` is passed straight to the
    engine and the engine result returned.
    """
    opts = opts or SolveOptions()
    if isinstance(problem, ConeProgram):
        return solve_cone_program(problem, reltol=opts.tol,
                                  max_iter=opts.max_iter)
    if not isinstance(problem, PackingProblem):
        raise InvalidInput(f"cannot solve a {type(problem).__name__}")

    ok, idx = check_feasible(problem)
    if not ok:
        return Solution(X=np.zeros((problem.n, problem.n)), objective=math.nan,
                        numerical_rank=0, mu=np.zeros(problem.l),
                        status=Status.INFEASIBLE)
    cert = check_bounded(problem)
    if not cert.bounded:
        ray = cert.ray
        return Solution(X=linalg.symmetrize(np.outer(ray, ray)),
                        objective=math.inf, numerical_rank=1,
                        mu=np.zeros(problem.l), status=Status.UNBOUNDED)

    S = problem.mat_sum()
    if linalg.rank_tol(S) < problem.n:
        U = linalg.range_basis(S)
        inner = PackingProblem(
            C=linalg.symmetrize(U.T @ problem.C @ U),
            mats=tuple(linalg.symmetrize(U.T @ m @ U) for m in problem.mats),
            b=problem.b.copy())
    else:
        U = None
        inner = problem

    prog = _packing_cone_program(inner.C, inner.mats, inner.b)
    res = solve_cone_program(prog, reltol=opts.tol, max_iter=opts.max_iter)
    if res.x is None:
        raise NumericalFailure("cone solver returned no iterate")
    X = linalg.symmetrize(smat(res.x, inner.n))
    if U is not None:
        X = linalg.symmetrize(U @ X @ U.T)
    mu = np.clip(res.z[:problem.l], 0.0, None)

    if res.status == "near_unattained":
        status = Status.NEAR_UNATTAINED
    elif res.status == "optimal":
        status = Status.OPTIMAL
    elif res.status == "max_iterations" \
            and max(res.pres, res.dres, res.relgap) <= 1e3 * opts.tol:
        # stalled short of target but close; report honestly, do not raise
        status = Status.MAX_ITERATIONS
    elif res.status == "max_iterations":
        kkt, _ = kkt_check(problem, X, mu, opts.tol)
        raise MaxIterations(
            "iteration limit before convergence",
            best=Solution(X=X, objective=float(np.trace(problem.C @ X)),
                          numerical_rank=linalg.rank_tol(X, opts.rank_threshold),
                          mu=mu, status=Status.MAX_ITERATIONS,
                          kkt_residuals=kkt))
    else:
        raise NumericalFailure("interior-point breakdown in the dense oracle")
    kkt, _ = kkt_check(problem, X, mu, opts.tol)
    return Solution(X=X, objective=float(np.trace(problem.C @ X)),
                    numerical_rank=linalg.rank_tol(X, opts.rank_threshold),
                    mu=mu, status=status, kkt_residuals=kkt, route="direct")


# ---------------------------------------------------------------------------
# low-rank packing pipeline


def truncate_psd(X: np.ndarray, threshold: float) -> np.ndarray:
    """Zero out eigenvalues below ``threshold`` times the largest one."""
    dec = linalg.eigh_desc(X)
    w = np.clip(dec.eigenvalues, 0.0, None)
    if w[0] <= 0.0:
        return np.zeros_like(X)
    w[w < threshold * w[0]] = 0.0
    return linalg.symmetrize((dec.eigenvectors * w) @ dec.eigenvectors.T)


def _truncate_feasible(problem: PackingProblem, X: np.ndarray,
                       threshold: float) -> np.ndarray:
    """Truncate, then re-verify feasibility; if the truncation violated a
    constraint beyond roundoff, retry keeping more eigenvalues."""
    scale = max(1.0, float(np.max(np.abs(problem.b))))
    t = threshold
    for _ in range(8):
        Xt = truncate_psd(X, t)
        slacks = problem.b - np.array([np.trace(m @ Xt) for m in problem.mats])
        if float(np.min(slacks)) >= -1e-8 * scale:
            return Xt
        t *= 1e-2
    return X


def solve_packing_lowrank(problem: PackingProblem,
                          opts: SolveOptions | None = None,
                          route: str = "auto") -> Solution:
    """Solve a packing problem with a solution of rank at most
    ``rank(C)``.

    Pipeline: project to strictly feasible form; if the projected objective
    has rank one, go through the cone-program rewrite; otherwise follow the
    perturbation path ``M_i + eps I`` (every perturbed optimum has rank at
    most ``rank(C)``), truncate the final iterate's spectrum, re-verify
    feasibility, and lift.  Path values are checked monotone: they may only
    increase as ``eps`` decreases, else ``PathDiverged`` is raised.

    ``route`` forces "socp" (requires a rank-one projected objective) or
    "eps-path"; the default picks by rank.
    """
    opts = opts or SolveOptions()
    if route not in ("auto", "socp", "eps-path"):
        raise InvalidInput(f"unknown route {route!r}")
    ok, idx = check_feasible(problem)
    if not ok:
        raise InfeasibleInput(f"right-hand side {idx} is negative")
    cert = check_bounded(problem)
    if not cert.bounded:
        raise UnboundedInput("objective range leaves the constraint range",
                             ray=cert.ray)

    red, lift = reduction.project_packing(problem)
    if red.empty or linalg.rank_tol(red.problem.C) == 0:
        X = np.zeros((problem.n, problem.n))
        if linalg.rank_tol(problem.C) == 0:
            mu = np.zeros(problem.l)
        else:
            mu, _ = solve_dual_packing(problem, opts)
        kkt, _ = kkt_check(problem, X, mu, opts.tol)
        return Solution(X=X, objective=0.0, numerical_rank=0, mu=mu,
                        status=Status.OPTIMAL, kkt_residuals=kkt, route="trivial")

    inner = red.problem
    use_socp = (linalg.rank_tol(inner.C) == 1) if route == "auto" \
        else (route == "socp")
    if use_socp:
        X_red, mu_red, path = _rank_one_route(inner, opts)
        route = "socp"
    else:
        X_red, mu_red, path = _eps_path_route(inner, opts)
        route = "eps-path"

    X = reduction.lift_solution(X_red, lift)
    mu = reduction.embed_dual(red, mu_red, problem.l)
    kkt, passed = kkt_check(problem, X, mu, opts.tol)
    if not passed:
        Xp, mup = _newton_polish(problem, X, mu)
        candidates = [mu, _polish_multipliers(problem, Xp, mup), mup]
        if red.zeroed or red.dropped:
            # multipliers for eliminated constraints may be needed; recover
            # them from the original dual
            try:
                mu_full, _ = solve_dual_packing(problem, opts)
                candidates.append(mu_full)
            except NumericalFailure:
                pass
        mu_new, kkt_new = _best_multipliers(problem, Xp, candidates, opts.tol)
        if kkt_new.max() < kkt.max():
            X, mu, kkt = Xp, mu_new, kkt_new
    return Solution(X=X, objective=float(np.trace(problem.C @ X)),
                    numerical_rank=linalg.rank_tol(X, opts.rank_threshold),
                    mu=mu, status=Status.OPTIMAL, kkt_residuals=kkt,
                    route=route, path_values=tuple(path))


def _newton_polish(problem: PackingProblem, X: np.ndarray, mu: np.ndarray):
    """Newton refinement of the optimality system in factored form.

    With ``X = V V.T`` at its numerical rank and the active constraints
    ``A``, the square system ``(sum mu_i M_i - C) V = 0``,
    ``<M_i, V V.T> = b_i (i in A)`` pins the optimizer; a couple of Newton
    steps remove the sqrt-of-gap error that interior-point iterates carry
    near degenerate solutions.  Returns a possibly improved ``(X, mu)``.
    """
    n, l = problem.n, problem.l
    dec = linalg.eigh_desc(X)
    r = max(1, linalg.rank_tol(X, 1e-8))
    V = dec.eigenvectors[:, :r] * np.sqrt(np.clip(dec.eigenvalues[:r], 0.0, None))
    scale = max(1.0, float(np.max(np.abs(problem.b))))
    traces = np.array([float(np.trace(m @ X)) for m in problem.mats])
    active = np.flatnonzero(problem.b - traces <= 1e-6 * scale)
    if active.size == 0:
        return X, mu
    mu_a = mu[active].copy()
    nr = n * r
    for _ in range(3):
        S = linalg.symmetrize(
            sum(m * M for m, M in zip(mu_a, (problem.mats[i] for i in active)))
            - problem.C)
        F = np.r_[(S @ V).ravel(),
                  [float(np.sum(V * (problem.mats[i] @ V))) - problem.b[i]
                   for i in active]]
        J = np.zeros((nr + active.size, nr + active.size))
        col = 0
        for j in range(n):
            for k in range(r):
                E = np.zeros((n, r))
                E[j, k] = 1.0
                J[:nr, col] = (S @ E).ravel()
                for a, i in enumerate(active):
                    J[nr + a, col] = 2.0 * float(np.sum(V * (problem.mats[i] @ E)))
                col += 1
        for a, i in enumerate(active):
            J[:nr, col] = (problem.mats[i] @ V).ravel()
            col += 1
        try:
            delta = np.linalg.lstsq(J, -F, rcond=None)[0]
        except np.linalg.LinAlgError:
            return X, mu
        V = V + delta[:nr].reshape(n, r)
        mu_a = np.clip(mu_a + delta[nr:], 0.0, None)
    X_new = linalg.symmetrize(V @ V.T)
    traces_new = np.array([float(np.trace(m @ X_new)) for m in problem.mats])
    if float(np.max(traces_new - problem.b)) > 1e-9 * scale:
        return X, mu
    mu_new = np.zeros(l)
    mu_new[active] = mu_a
    return X_new, mu_new


def _polish_multipliers(problem: PackingProblem, X: np.ndarray,
                        mu: np.ndarray) -> np.ndarray:
    """Refit multipliers on the active constraints so that the dual slack
    annihilates the solution's range (the stationarity part of optimality);
    the interior-point multipliers carry a small bias from the perturbation
    and this least-squares step removes it."""
    R = linalg.range_basis(X, tol=1e-8)
    if R.shape[1] == 0:
        return mu
    scale = max(1.0, float(np.max(np.abs(problem.b))))
    traces = np.array([float(np.trace(m @ X)) for m in problem.mats])
    active = np.flatnonzero(problem.b - traces <= 1e-6 * scale)
    if active.size == 0:
        return mu
    cols = np.column_stack([(problem.mats[i] @ R).ravel() for i in active])
    target = (problem.C @ R).ravel()
    fit, _ = scipy.optimize.nnls(cols, target)
    out = np.zeros(problem.l)
    out[active] = fit
    return out


def _best_multipliers(problem, X, candidates, tol):
    best_mu, best_kkt, best_val = None, None, math.inf
    for mu in candidates:
        kkt, passed = kkt_check(problem, X, mu, tol)
        val = kkt.max()
        if passed:
            return mu, kkt
        if val < best_val:
            best_mu, best_kkt, best_val = mu, kkt, val
    return best_mu, best_kkt


def _rank_one_route(inner: PackingProblem, opts: SolveOptions):
    socp = reduction.to_socp_rank1(inner)
    res = solve_socp(socp, opts)
    if res.report.status is not Status.OPTIMAL:
        raise NumericalFailure(f"cone solve ended with {res.report.status.value}")
    x = res.x
    c = socp.objective
    if c @ x < 0:
        x = -x
    X_red = np.outer(x, x)
    # cone duals map to packing multipliers: mu_i = value * z_i0 / sqrt(b_i)
    value = float(c @ x)
    mu_red = np.array([value * z0 / con.d if con.d > 0 else 0.0
                       for (z0, _), con in zip(res.cone_duals, socp.cones)])
    return X_red, np.clip(mu_red, 0.0, None), ()


def _eps_path_route(inner: PackingProblem, opts: SolveOptions):
    warm = None
    values = []
    final = None
    for eps in opts.eps_schedule:
        prog = _packing_cone_program(inner.C, inner.mats, inner.b, eps=eps)
        res = solve_cone_program(prog, reltol=_PATH_RELTOL,
                                 feastol=_PATH_FEASTOL,
                                 max_iter=opts.max_iter, warm=warm)
        if res.status not in ("optimal", "max_iterations") or res.x is None:
            raise NumericalFailure(
                f"perturbed solve at eps={eps:g} ended with {res.status}")
        values.append(-res.pcost)
        warm = (res.x, res.y, res.s, res.z)
        final = res
    scale = max(1.0, float(np.max(np.abs(values))))
    for a, b in zip(values, values[1:]):
        if b < a - _MONOTONE_SLACK * scale:
            raise PathDiverged(
                f"perturbation-path values decreased: {a!r} -> {b!r}")
    X = linalg.symmetrize(smat(final.x, inner.n))
    X = _truncate_feasible(inner, X, opts.rank_threshold)
    mu = np.clip(final.z[:inner.l], 0.0, None)
    return X, mu, values


# ---------------------------------------------------------------------------
# combined problems


def _combined_primal_feasible(cmb: CombinedProblem) -> tuple[bool, float]:
    """Maximize the worst constraint slack over (Y, lam) with X = 0."""
    p, q, l = cmb.p, cmb.q, cmb.l
    Lp = svec_dim(p) if p else 0
    nv = Lp + q + 1
    c = np.zeros(nv)
    c[-1] = -1.0
    rows = []
    h = []
    for m, bi, r, hi in zip(cmb.mats, cmb.b, cmb.Rs, cmb.hs):
        row = np.zeros(nv)
        if p:
            row[:Lp] = -svec(r)
        row[Lp:Lp + q] = -hi
        row[-1] = 1.0
        rows.append(row)
        h.append(float(bi))
    cap = np.zeros(nv)
    cap[-1] = 1.0
    rows.append(cap)
    h.append(1.0)
    G = np.vstack(rows)
    hv = np.asarray(h)
    cones = [("nn", l + 1)]
    if p:
        Gp = np.zeros((Lp, nv))
        Gp[:, :Lp] = -np.eye(Lp)
        G = np.vstack([G, Gp])
        hv = np.r_[hv, np.zeros(Lp)]
        cones.append(("psd", p))
    res = solve_cone_program(ConeProgram(c=c, G=G, h=hv, cones=cones),
                             reltol=1e-9)
    if not res.optimal:
        return False, -math.inf
    return bool(-res.pcost >= -1e-9), float(-res.pcost)


def _combined_dual_phase1(cmb: CombinedProblem) -> tuple[bool, np.ndarray, float]:
    """Minimize the uniform relaxation ``t`` of the dual constraints; the
    dual is feasible exactly when the minimum is nonpositive."""
    l, n, p, q = cmb.l, cmb.n, cmb.p, cmb.q
    c = np.zeros(l + 1)
    c[-1] = 1.0
    G_nn = np.zeros((l + 1, l + 1))
    G_nn[:l, :l] = -np.eye(l)
    G_nn[l, l] = -1.0
    h_nn = np.r_[np.zeros(l), 1.0]
    Ln = svec_dim(n)
    G_psd = np.zeros((Ln, l + 1))
    for i, m in enumerate(cmb.mats):
        G_psd[:, i] = -svec(m)
    G_psd[:, l] = -svec(np.eye(n))
    h_psd = -svec(cmb.C)
    G = np.vstack([G_nn, G_psd])
    h = np.r_[h_nn, h_psd]
    cones = [("nn", l + 1), ("psd", n)]
    if p:
        Lp = svec_dim(p)
        G_r = np.zeros((Lp, l + 1))
        for i, r in enumerate(cmb.Rs):
            G_r[:, i] = svec(r)
        G_r[:, l] = -svec(np.eye(p))
        G = np.vstack([G, G_r])
        h = np.r_[h, -svec(cmb.R0)]
        cones.append(("psd", p))
    A = np.hstack([cmb.H, np.zeros((q, 1))]) if q else None
    beq = -cmb.h0 if q else None
    res = solve_cone_program(ConeProgram(c=c, G=G, h=h, cones=cones, A=A, b=beq),
                             reltol=1e-9)
    if res.status == "primal_infeasible" or res.x is None:
        return False, np.zeros(l), math.inf
    t = float(res.x[-1])
    tol = 1e-7 * max(1.0, float(np.linalg.norm(cmb.C)))
    return bool(t <= tol), np.clip(res.x[:l], 0.0, None), t


def _combined_cone_program(cmb: CombinedProblem, cap: float,
                           eps: float) -> ConeProgram:
    """Trace-capped, constraint-perturbed combined problem as a cone program."""
    n, p, q, l = cmb.n, cmb.p, cmb.q, cmb.l
    Lx, Lp = svec_dim(n), (svec_dim(p) if p else 0)
    nv = Lx + Lp + q
    eye_n = np.eye(n)
    rows, h = [], []
    for m, bi, r, hi in zip(cmb.mats, cmb.b, cmb.Rs, cmb.hs):
        row = np.zeros(nv)
        row[:Lx] = svec(m + eps * eye_n)
        if p:
            row[Lx:Lx + Lp] = -svec(r)
        row[Lx + Lp:] = -hi
        rows.append(row)
        h.append(float(bi))
    trace_row = np.zeros(nv)
    trace_row[:Lx] = cap * svec(eye_n)
    if p:
        trace_row[Lx:Lx + Lp] = cap * svec(np.eye(p))
    rows.append(trace_row)
    h.append(1.0)
    G_nn = np.vstack(rows)
    G_x = np.zeros((Lx, nv))
    G_x[:, :Lx] = -np.eye(Lx)
    G = np.vstack([G_nn, G_x])
    hv = np.r_[np.asarray(h), np.zeros(Lx)]
    cones = [("nn", l + 1), ("psd", n)]
    if p:
        G_y = np.zeros((Lp, nv))
        G_y[:, Lx:Lx + Lp] = -np.eye(Lp)
        G = np.vstack([G, G_y])
        hv = np.r_[hv, np.zeros(Lp)]
        cones.append(("psd", p))
    c = np.zeros(nv)
    c[:Lx] = -svec(cmb.C)
    if p:
        c[Lx:Lx + Lp] = -svec(cmb.R0)
    c[Lx + Lp:] = -cmb.h0
    return ConeProgram(c=c, G=G, h=hv, cones=cones)


def solve_combined_eta(cmb: CombinedProblem,
                       opts: SolveOptions | None = None) -> CombinedSolution:
    """Follow the trace-cap path on a combined problem.

    Each stage solves the problem under ``cap * (tr X + tr Y) <= 1`` with a
    tiny constraint perturbation that forces every stage solution's first
    block to rank at most ``rank(C)``.  The stage values are nondecreasing
    as the cap loosens (else ``PathNotMonotone``); when they converge while
    the iterates' norms diverge, the supremum is reported asymptotic.
    """
    opts = opts or SolveOptions()
    ok, margin = _combined_primal_feasible(cmb)
    if not ok:
        raise InfeasiblePrimal(f"no feasible point (best slack {margin:.3e})")
    ok, _, t = _combined_dual_phase1(cmb)
    if not ok:
        raise InfeasibleDual(f"dual infeasible (relaxation needs t={t:.3e})")

    mat_scale = max(1.0, max((float(np.linalg.eigvalsh(m)[-1])
                              for m in cmb.mats), default=1.0))
    eps = 1e-9 * mat_scale
    rank_cap = linalg.rank_tol(cmb.C)

    warm = None
    gammas, norms, ranks = [], [], []
    last = None
    for cap in opts.eta_schedule:
        prog = _combined_cone_program(cmb, cap, eps)
        res = solve_cone_program(prog, reltol=_PATH_RELTOL,
                                 feastol=_PATH_FEASTOL,
                                 max_iter=opts.max_iter, warm=warm)
        if res.status not in ("optimal", "max_iterations", "near_unattained") \
                or res.x is None:
            raise NumericalFailure(
                f"trace-cap solve at cap={cap:g} ended with {res.status}")
        warm = (res.x, res.y, res.s, res.z)
        gammas.append(-res.pcost)
        X, Y, lam = _split_combined(res.x, cmb)
        Xt = truncate_psd(X, opts.rank_threshold)
        ranks.append(linalg.rank_tol(Xt, opts.rank_threshold))
        norms.append(float(np.trace(X)) + (float(np.trace(Y)) if cmb.p else 0.0)
                     + float(np.linalg.norm(lam, 1)))
        last = (Xt, Y, lam)

    scale = max(1.0, float(np.max(np.abs(gammas))))
    for a, b in zip(gammas, gammas[1:]):
        if b < a - _MONOTONE_SLACK * scale:
            raise PathNotMonotone(
                f"trace-cap path values decreased: {a!r} -> {b!r}")

    X, Y, lam = last
    converged = (len(gammas) < 2
                 or abs(gammas[-1] - gammas[-2]) <= 1e-3 * scale)
    diverging = (norms[-1] >= 100.0 * (1.0 + norms[0])
                 and norms[-1] >= 1e3 * (1.0 + float(np.max(np.abs(cmb.b)))))
    status = Status.ASYMPTOTIC_SUP if (diverging and converged) else Status.OPTIMAL
    return CombinedSolution(X=X, Y=Y, lam=lam, objective=float(gammas[-1]),
                            status=status, gamma=tuple(gammas),
                            ranks=tuple(ranks))


def _split_combined(x: np.ndarray, cmb: CombinedProblem):
    n, p, q = cmb.n, cmb.p, cmb.q
    Lx = svec_dim(n)
    Lp = svec_dim(p) if p else 0
    X = linalg.symmetrize(smat(x[:Lx], n))
    Y = linalg.symmetrize(smat(x[Lx:Lx + Lp], p)) if p else np.zeros((0, 0))
    lam = x[Lx + Lp:Lx + Lp + q].copy()
    return X, Y, lam


def solve_combined_dual(cmb: CombinedProblem,
                        opts: SolveOptions | None = None,
                        caps: tuple[float, float] = (2e-5, 1e-5),
                        ) -> tuple[np.ndarray, float]:
    """Optimal multipliers and value of the dual of a combined problem.

    The dual may touch its feasible set in a single point, which defeats a
    direct interior-point solve; instead the trace-capped primal is solved
    at two caps (both sides strictly feasible there, values exact to solver
    tolerance) and the value extrapolated linearly in the cap.  The
    multipliers come from the tighter cap's constraint duals.
    """
    opts = opts or SolveOptions()
    ok, _, t = _combined_dual_phase1(cmb)
    if not ok:
        raise InfeasibleDual(f"dual infeasible (relaxation needs t={t:.3e})")
    vals, mu_last = [], None
    for cap in caps:
        # cold starts: these solves need full accuracy and the warm point
        # sits too close to the boundary to help
        prog = _combined_cone_program(cmb, cap, eps=0.0)
        res = solve_cone_program(prog, reltol=_PATH_RELTOL,
                                 feastol=_PATH_FEASTOL,
                                 max_iter=opts.max_iter)
        if res.status not in ("optimal", "max_iterations") or res.x is None:
            raise NumericalFailure(
                f"capped solve at cap={cap:g} ended with {res.status}")
        vals.append(-res.pcost)
        mu_last = np.clip(res.z[:cmb.l], 0.0, None)
    # value is linear in the cap while the cap binds; extrapolate to zero
    v1, v2 = vals
    ratio = caps[0] / caps[1]
    value = v2 + (v2 - v1) / (ratio - 1.0)
    scale = max(1.0, abs(v2))
    if abs(v2 - v1) <= 10.0 * _PATH_RELTOL * scale:
        value = v2
    return mu_last, float(value)


# ---------------------------------------------------------------------------
# design recovery and the factorized cross-check


def recover_design(mu: np.ndarray, b: np.ndarray | None = None,
                   mode: str = "simplex", t: float | None = None) -> np.ndarray:
    """Design weights from packing duals.

    ``simplex``: ``w = mu / (mu . b)`` (so ``w . b = 1``); ``resource``:
    ``w = mu / t`` with ``t`` the dual's scalar variable.
    """
    mu = np.asarray(mu, dtype=float)
    if mode == "simplex":
        if b is None:
            b = np.ones(mu.shape[0])
        total = float(mu @ np.asarray(b, float))
        if total <= 0 or not np.any(mu > 0):
            raise ZeroDual("dual vector has no positive mass")
        return mu / total
    if mode == "resource":
        if t is None or t <= 0:
            raise ZeroDual("resource recovery needs the positive dual scalar")
        return mu / t
    raise InvalidInput(f"unknown recovery mode {mode!r}")


def solve_packing_bm(problem: PackingProblem, rank: int | None = None,
                     opts: SolveOptions | None = None) -> Solution:
    """Factorized cross-check: search ``X = R R.T`` with ``R`` of width
    ``rank`` by sequential quadratic programming.

    Non-convex, so the result is certified only when the recovered
    multipliers pass the optimality check; otherwise the solution is
    returned with ``certified=False``.  Never the default route.
    """
    opts = opts or SolveOptions()
    ok, idx = check_feasible(problem)
    if not ok:
        raise InfeasibleInput(f"right-hand side {idx} is negative")
    n, l = problem.n, problem.l
    r = rank or max(1, linalg.rank_tol(problem.C))
    rng = np.random.default_rng(0)
    best_val, best_R = -math.inf, None
    for _ in range(3):
        R0 = 0.1 * rng.standard_normal((n, r))

        def objective(v):
            R = v.reshape(n, r)
            return -float(np.sum(R * (problem.C @ R)))

        def objective_grad(v):
            R = v.reshape(n, r)
            return (-2.0 * problem.C @ R).ravel()

        cons = []
        for m, bi in zip(problem.mats, problem.b):
            cons.append({
                "type": "ineq",
                "fun": (lambda v, m=m, bi=bi:
                        bi - float(np.sum(v.reshape(n, r)
                                          * (m @ v.reshape(n, r))))),
                "jac": (lambda v, m=m: (-2.0 * m @ v.reshape(n, r)).ravel()),
            })
        sol = scipy.optimize.minimize(objective, R0.ravel(),
                                      jac=objective_grad, constraints=cons,
                                      method="SLSQP",
                                      options={"maxiter": 300, "ftol": 1e-12})
        if -sol.fun > best_val and np.all([c["fun"](sol.x) >= -1e-7 for c in cons]):
            best_val, best_R = -sol.fun, sol.x.reshape(n, r)
    if best_R is None:
        raise NumericalFailure("factorized search found no feasible point")
    X = linalg.symmetrize(best_R @ best_R.T)
    mu = _nnls_multipliers(problem, best_R)
    kkt, passed = kkt_check(problem, X, mu, 1e-5)
    return Solution(X=X, objective=float(np.trace(problem.C @ X)),
                    numerical_rank=linalg.rank_tol(X, opts.rank_threshold),
                    mu=mu, status=Status.OPTIMAL, kkt_residuals=kkt,
                    route="bm", certified=passed)


def _nnls_multipliers(problem: PackingProblem, R: np.ndarray) -> np.ndarray:
    """Stationarity multipliers for a factorized point: least-squares fit of
    ``sum mu_i M_i R = C R`` over ``mu >= 0``."""
    cols = [(m @ R).ravel() for m in problem.mats]
    target = (problem.C @ R).ravel()
    mu, _ = scipy.optimize.nnls(np.column_stack(cols), target)
    return mu
