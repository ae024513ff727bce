"""Dense primal-dual interior-point engine for cone programs.

Solves::

    minimize    c . x
    subject to  G x + s = h,   s in K,
                A x = b,

where ``K`` is a product of nonnegative, second-order, and semidefinite
cones.  PSD blocks travel in packed symmetric (``svec``) coordinates so
that the Euclidean inner product of packed vectors equals the trace inner
product of the matrices.

The algorithm is a homogeneous self-dual embedding with Nesterov-Todd
scaling and a Mehrotra-style predictor-corrector; infeasibility and
unboundedness come out as certificates of the embedding.  Dense
factorizations with iterative refinement keep the search directions
accurate enough to push relative gaps to ~1e-11 on desk-scale problems,
which the path-following solvers need for their monotonicity checks.

This is an internal engine; the user-facing entry points are in
``sdpack.solve``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InvalidInput, NumericalFailure

# fraction of the distance to the cone boundary taken per step
_STEP = 0.99
_REFINE_ROUNDS = 2
_STALL_LIMIT = 8
_TRACE = False


def _trace(*args):
    if _TRACE:
        print("[conelp]", *args)


# ---------------------------------------------------------------------------
# packed symmetric coordinates


def svec(S: np.ndarray) -> np.ndarray:
    """Pack a symmetric matrix so that ``svec(A) . svec(B) == <A, B>``."""
    n = S.shape[0]
    r, c = np.tril_indices(n)
    scale = np.where(r == c, 1.0, math.sqrt(2.0))
    return S[r, c] * scale


def smat(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`svec`."""
    S = np.zeros((n, n))
    r, c = np.tril_indices(n)
    vals = np.asarray(v) / np.where(r == c, 1.0, math.sqrt(2.0))
    S[r, c] = vals
    S[c, r] = vals
    return S


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


# ---------------------------------------------------------------------------
# cone layout


@dataclass(frozen=True)
class ConeProgram:
    """Cone program data.  ``cones`` lists blocks as ``("nn", d)``,
    ``("soc", d)`` or ``("psd", n)`` covering the rows of ``G`` in order
    (PSD blocks occupy ``n (n + 1) / 2`` packed rows)."""

    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    cones: tuple[tuple[str, int], ...]
    A: np.ndarray | None = None
    b: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))
        object.__setattr__(self, "G", np.atleast_2d(np.asarray(self.G, dtype=float)))
        object.__setattr__(self, "h", np.asarray(self.h, dtype=float))
        object.__setattr__(self, "cones", tuple((str(k), int(d)) for k, d in self.cones))
        if self.A is not None:
            object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, dtype=float)))
            object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        rows = sum(svec_dim(d) if k == "psd" else d for k, d in self.cones)
        if rows != self.G.shape[0] or self.h.shape[0] != rows:
            raise InvalidInput(f"cone rows {rows} do not match G/h ({self.G.shape[0]})")
        if self.G.shape[1] != self.c.shape[0]:
            raise InvalidInput("G columns do not match objective length")
        if self.A is not None and (self.A.shape[1] != self.c.shape[0]
                                   or self.A.shape[0] != self.b.shape[0]):
            raise InvalidInput("A/b shapes inconsistent with objective")


class _Block:
    __slots__ = ("kind", "dim", "sl", "order")

    def __init__(self, kind: str, order: int, start: int):
        self.kind = kind
        self.order = order
        self.dim = svec_dim(order) if kind == "psd" else order
        self.sl = slice(start, start + self.dim)


class _Layout:
    def __init__(self, cones):
        self.blocks: list[_Block] = []
        pos = 0
        for kind, d in cones:
            if kind not in ("nn", "soc", "psd"):
                raise InvalidInput(f"unknown cone kind {kind!r}")
            if d <= 0:
                continue
            blk = _Block(kind, d, pos)
            pos += blk.dim
            self.blocks.append(blk)
        self.m = pos
        self.deg = sum(b.order if b.kind in ("nn", "psd") else 1 for b in self.blocks)

    def identity(self) -> np.ndarray:
        e = np.zeros(self.m)
        for b in self.blocks:
            if b.kind == "nn":
                e[b.sl] = 1.0
            elif b.kind == "soc":
                e[b.sl.start] = 1.0
            else:
                e[b.sl] = svec(np.eye(b.order))
        return e

    def margin(self, v: np.ndarray) -> float:
        """Smallest cone eigenvalue across blocks (>= 0 iff ``v`` in K)."""
        out = math.inf
        for b in self.blocks:
            u = v[b.sl]
            if b.kind == "nn":
                out = min(out, float(np.min(u)))
            elif b.kind == "soc":
                out = min(out, float(u[0] - np.linalg.norm(u[1:])))
            else:
                out = min(out, float(np.linalg.eigvalsh(smat(u, b.order))[0]))
        return out

    def circ(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty(self.m)
        for b in self.blocks:
            ub, vb = u[b.sl], v[b.sl]
            if b.kind == "nn":
                out[b.sl] = ub * vb
            elif b.kind == "soc":
                out[b.sl.start] = ub @ vb
                out[b.sl.start + 1:b.sl.stop] = ub[0] * vb[1:] + vb[0] * ub[1:]
            else:
                U, V = smat(ub, b.order), smat(vb, b.order)
                out[b.sl] = svec(0.5 * (U @ V + V @ U))
        return out

    def circ_solve(self, lam: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Solve ``lam o u = v`` for ``u`` (``lam`` interior)."""
        out = np.empty(self.m)
        for b in self.blocks:
            lb, vb = lam[b.sl], v[b.sl]
            if b.kind == "nn":
                out[b.sl] = vb / lb
            elif b.kind == "soc":
                a = lb[0] ** 2 - lb[1:] @ lb[1:]
                u0 = (lb[0] * vb[0] - lb[1:] @ vb[1:]) / a
                out[b.sl.start] = u0
                out[b.sl.start + 1:b.sl.stop] = (vb[1:] - u0 * lb[1:]) / lb[0]
            else:
                L = smat(lb, b.order)
                d = np.diag(L)
                if np.allclose(L, np.diag(d)):
                    # scaled points are diagonal by construction
                    V = smat(vb, b.order)
                    out[b.sl] = svec(2.0 * V / np.add.outer(d, d))
                else:
                    w, Q = np.linalg.eigh(L)
                    V = Q.T @ smat(vb, b.order) @ Q
                    out[b.sl] = svec(Q @ (2.0 * V / np.add.outer(w, w)) @ Q.T)
        return out

    def max_step(self, lam: np.ndarray, d: np.ndarray) -> float:
        """Largest ``a`` with ``lam + t d`` in K for all ``t in [0, a]``."""
        out = math.inf
        for b in self.blocks:
            lb, db = lam[b.sl], d[b.sl]
            if b.kind == "nn":
                neg = db < 0
                if np.any(neg):
                    out = min(out, float(np.min(-lb[neg] / db[neg])))
            elif b.kind == "soc":
                # roots of |lb1 + a db1|^2 = (lb0 + a db0)^2
                p2 = db[1:] @ db[1:] - db[0] ** 2
                p1 = 2.0 * (lb[1:] @ db[1:] - lb[0] * db[0])
                p0 = lb[1:] @ lb[1:] - lb[0] ** 2  # <= 0 inside
                out = min(out, _smallest_positive_root(p2, p1, p0))
            else:
                L = smat(lb, b.order)
                w, Q = np.linalg.eigh(L)
                w = np.maximum(w, 1e-300)
                scale = Q / np.sqrt(w)[None, :]
                Dm = scale.T @ smat(db, b.order) @ scale
                lo = float(np.linalg.eigvalsh(Dm)[0])
                if lo < 0:
                    out = min(out, -1.0 / lo)
        return out


def _smallest_positive_root(p2: float, p1: float, p0: float) -> float:
    """Smallest positive root of ``p2 a^2 + p1 a + p0 = 0`` (inf if none)."""
    if abs(p2) < 1e-300:
        if p1 > 0 and p0 < 0:
            return -p0 / p1
        return math.inf
    disc = p1 * p1 - 4.0 * p2 * p0
    if disc < 0:
        return math.inf
    sq = math.sqrt(disc)
    roots = [(-p1 - sq) / (2 * p2), (-p1 + sq) / (2 * p2)]
    pos = [r for r in roots if r > 0]
    return min(pos) if pos else math.inf


class _Scaling:
    """Nesterov-Todd scaling materialized as dense matrices.

    ``lam = W @ z = inv(W).T @ s`` is the scaled point.  For PSD blocks the
    svec-space matrix of ``V -> R.T V R`` is not symmetric; transposes are
    kept explicit throughout.
    """

    def __init__(self, layout: _Layout, s: np.ndarray, z: np.ndarray):
        m = layout.m
        self.W = np.zeros((m, m))
        self.Winv = np.zeros((m, m))
        self.lam = np.zeros(m)
        for b in layout.blocks:
            sb, zb = s[b.sl], z[b.sl]
            if b.kind == "nn":
                w = np.sqrt(sb / zb)
                self.W[b.sl, b.sl] = np.diag(w)
                self.Winv[b.sl, b.sl] = np.diag(1.0 / w)
                self.lam[b.sl] = np.sqrt(sb * zb)
            elif b.kind == "soc":
                Wb, Wibm, lb = _soc_scaling(sb, zb)
                self.W[b.sl, b.sl] = Wb
                self.Winv[b.sl, b.sl] = Wibm
                self.lam[b.sl] = lb
            else:
                Wb, Wib, lb = _psd_scaling(sb, zb, b.order)
                self.W[b.sl, b.sl] = Wb
                self.Winv[b.sl, b.sl] = Wib
                self.lam[b.sl] = lb


def _soc_scaling(s: np.ndarray, z: np.ndarray):
    J = np.diag(np.r_[1.0, -np.ones(s.shape[0] - 1)])
    # relative floors keep the scaling finite when an iterate touches the
    # boundary; the solver then stops on its stall test instead of overflowing
    rho_s = math.sqrt(max(s[0] ** 2 - s[1:] @ s[1:], (1e-15 * s[0]) ** 2, 1e-300))
    rho_z = math.sqrt(max(z[0] ** 2 - z[1:] @ z[1:], (1e-15 * z[0]) ** 2, 1e-300))
    sb, zb = s / rho_s, z / rho_z
    gamma = math.sqrt(max((1.0 + sb @ zb) / 2.0, 1e-300))
    wbar = np.r_[sb[0] + zb[0], sb[1:] - zb[1:]] / (2.0 * gamma)
    # hyperbolic Householder point: the Jordan square root of wbar
    v = wbar.copy()
    v[0] += 1.0
    v /= math.sqrt(2.0 * (wbar[0] + 1.0))
    eta = math.sqrt(rho_s / rho_z)
    W = eta * (2.0 * np.outer(v, v) - J)
    jv = J @ v
    Winv = (2.0 * np.outer(jv, jv) - J) / eta
    return W, Winv, W @ z


def _chol_or_eig(S: np.ndarray) -> np.ndarray:
    """Factor ``S = F @ F.T`` for a (numerically) PD matrix."""
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        w, Q = np.linalg.eigh(0.5 * (S + S.T))
        w = np.maximum(w, max(1e-15 * float(w[-1]), 1e-300))
        return Q * np.sqrt(w)[None, :]


def _psd_scaling(s: np.ndarray, z: np.ndarray, n: int):
    S, Z = smat(s, n), smat(z, n)
    Ls = _chol_or_eig(S)
    Lz = _chol_or_eig(Z)
    U, sv, Vt = np.linalg.svd(Lz.T @ Ls)
    sv = np.maximum(sv, max(1e-15 * float(sv[0]), 1e-300))
    R = Ls @ Vt.T / np.sqrt(sv)[None, :]
    Rinv = (U.T @ Lz.T) / np.sqrt(sv)[:, None]
    dim = svec_dim(n)
    W = np.empty((dim, dim))
    Winv = np.empty((dim, dim))
    basis = np.eye(dim)
    for j in range(dim):
        Ej = smat(basis[j], n)
        W[:, j] = svec(R.T @ Ej @ R)
        Winv[:, j] = svec(Rinv.T @ Ej @ Rinv)
    lam = svec(np.diag(sv))
    return W, Winv, lam


# ---------------------------------------------------------------------------
# result


@dataclass
class ConeResult:
    status: str                    # optimal | primal_infeasible | dual_infeasible |
                                   # near_unattained | max_iterations | numerical_failure
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    s: np.ndarray | None = None
    pcost: float = math.nan
    dcost: float = math.nan
    gap: float = math.inf
    relgap: float = math.inf
    pres: float = math.inf
    dres: float = math.inf
    iterations: int = 0
    ray: np.ndarray | None = None          # improving direction when unbounded
    infeas_cert: tuple | None = None       # (y, z) certificate when infeasible
    cone_slices: tuple = field(default_factory=tuple)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# ---------------------------------------------------------------------------
# the solver


def solve_cone_program(prog: ConeProgram, *, reltol: float = 1e-8,
                       feastol: float | None = None, max_iter: int = 100,
                       warm: tuple | None = None) -> ConeResult:
    """Run the interior-point iteration on ``prog``.

    ``warm`` may carry ``(x, y, s, z)`` from a related solve; the pair is
    pushed back into the cone interior before use.
    """
    layout = _Layout(prog.cones)
    if feastol is None:
        feastol = max(reltol, 1e-10)
    c, G, h = prog.c, prog.G, prog.h
    nx, m = c.shape[0], layout.m
    if prog.A is not None and prog.A.shape[0] > 0:
        A, b = prog.A, prog.b
    else:
        A, b = np.zeros((0, nx)), np.zeros(0)
    p = A.shape[0]
    if m == 0:
        raise InvalidInput("cone program has no cone rows")

    e = layout.identity()
    deg = layout.deg

    x = np.zeros(nx)
    y = np.zeros(p)
    s = e.copy()
    z = e.copy()
    tau, kappa = 1.0, 1.0
    if warm is not None:
        wx, wy, ws, wz = warm
        if wx is not None and ws is not None and wz is not None:
            x = np.asarray(wx, dtype=float).copy()
            y = (np.asarray(wy, dtype=float).copy() if wy is not None and p
                 else np.zeros(p))
            s = _push_interior(layout, np.asarray(ws, dtype=float), e)
            z = _push_interior(layout, np.asarray(wz, dtype=float), e)
            tau = 1.0
            kappa = max((s @ z) / deg, 1e-8)

    norm_b = max(1.0, float(np.linalg.norm(b))) if p else 1.0
    norm_h = max(1.0, float(np.linalg.norm(h)))
    norm_c = max(1.0, float(np.linalg.norm(c)))

    best: ConeResult | None = None
    best_metric = math.inf
    stall = 0
    last_mu = math.inf

    slices = tuple((blk.kind, blk.sl) for blk in layout.blocks)

    for it in range(max_iter + 1):
        # residuals of the embedding
        r_x = G.T @ z + (A.T @ y if p else 0.0) + c * tau
        r_y = A @ x - b * tau if p else np.zeros(0)
        r_z = G @ x + s - h * tau
        r_tau = c @ x + (b @ y if p else 0.0) + h @ z + kappa
        mu = (s @ z + tau * kappa) / (deg + 1)

        # convergence metrics of the de-homogenized iterate, with residuals
        # measured relative to the size of the terms entering them (large
        # iterates would otherwise never pass an absolute test)
        xt, yt, zt, st = x / tau, y / tau, z / tau, s / tau
        pcost = float(c @ xt)
        dcost = float(-((b @ yt if p else 0.0) + h @ zt))
        gap = float(st @ zt)
        relgap = gap / max(1.0, abs(pcost), abs(dcost))
        Gx = G @ xt
        pres = float(np.linalg.norm(Gx + st - h)
                     / max(norm_h, float(np.linalg.norm(Gx)),
                           float(np.linalg.norm(st))))
        if p:
            Ax = A @ xt
            pres = max(pres, float(np.linalg.norm(Ax - b)
                                   / max(norm_b, float(np.linalg.norm(Ax)))))
        Gtz = G.T @ zt
        Aty = A.T @ yt if p else np.zeros(nx)
        dres = float(np.linalg.norm(Gtz + Aty + c)
                     / max(norm_c, float(np.linalg.norm(Gtz)),
                           float(np.linalg.norm(Aty))))

        metric = max(pres, dres, relgap)
        if metric < best_metric:
            best_metric = metric
            best = ConeResult(status="max_iterations", x=xt.copy(), y=yt.copy(),
                              z=zt.copy(), s=st.copy(), pcost=pcost, dcost=dcost,
                              gap=gap, relgap=relgap, pres=pres, dres=dres,
                              iterations=it, cone_slices=slices)

        if pres <= feastol and dres <= feastol and (relgap <= reltol or gap <= reltol):
            return ConeResult(status="optimal", x=xt, y=yt, z=zt, s=st,
                              pcost=pcost, dcost=dcost, gap=gap, relgap=relgap,
                              pres=pres, dres=dres, iterations=it,
                              cone_slices=slices)

        # infeasibility certificates
        omega = -((b @ y if p else 0.0) + h @ z)
        if omega > feastol * max(tau, kappa):
            resid = np.linalg.norm(G.T @ (z / omega) + (A.T @ (y / omega) if p else 0.0))
            if resid <= feastol * norm_c and layout.margin(z / omega) >= -feastol:
                return ConeResult(status="primal_infeasible", iterations=it,
                                  infeas_cert=(y / omega, z / omega),
                                  pres=pres, dres=dres, gap=gap, relgap=relgap,
                                  cone_slices=slices)
        omega_d = -(c @ x)
        if omega_d > feastol * max(tau, kappa):
            xr = x / omega_d
            sray = -G @ xr
            ok = layout.margin(sray) >= -feastol * norm_h
            if p:
                ok = ok and np.linalg.norm(A @ xr) <= feastol * norm_b
            if ok:
                return ConeResult(status="dual_infeasible", iterations=it, ray=xr,
                                  pres=pres, dres=dres, gap=gap, relgap=relgap,
                                  cone_slices=slices)

        # unattained-supremum heuristic: gap closing but iterates diverging
        if (relgap <= 1e3 * reltol and pres <= 1e2 * feastol and dres <= 1e2 * feastol
                and np.linalg.norm(xt, np.inf) > 1e8 * (norm_b + norm_h)):
            res = best if best is not None else ConeResult(status="near_unattained")
            res.status = "near_unattained"
            res.iterations = it
            return res

        if it == max_iter:
            break
        if mu > 0.9 * last_mu:
            stall += 1
            if stall >= _STALL_LIMIT:
                _trace('stall', mu, last_mu)
                break
        else:
            stall = 0
        last_mu = mu

        # scaling and KKT factorization
        try:
            sc = _Scaling(layout, s, z)
            WtW = sc.W.T @ sc.W
            kkt = _KktFactor(G, A, sc.Winv, WtW)
            dx1, dy1, dz1 = kkt.solve(-c, b, h)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError,
                ValueError) as exc:
            _trace('scaling/factor failure', exc)
            break
        denom = c @ dx1 + (b @ dy1 if p else 0.0) + h @ dz1 - kappa / tau
        if not np.isfinite(denom) or abs(denom) < 1e-14:
            _trace('tiny denom', denom)
            break

        lam = sc.lam
        lam_lam = layout.circ(lam, lam)

        def direction(sigma, corr_s, corr_tk):
            ds = sigma * mu * e - lam_lam - corr_s
            dtk = sigma * mu - tau * kappa - corr_tk
            fac = 1.0 - sigma
            rx2 = -fac * r_x
            ry2 = -fac * r_y if p else np.zeros(0)
            rz2 = -fac * r_z - sc.W.T @ layout.circ_solve(lam, ds)
            dx2, dy2, dz2 = kkt.solve(rx2, ry2, rz2)
            num = (-fac * r_tau - dtk / tau
                   - (c @ dx2 + (b @ dy2 if p else 0.0) + h @ dz2))
            dtau = num / denom
            dx = dx2 + dtau * dx1
            dy = dy2 + dtau * dy1
            dz = dz2 + dtau * dz1
            dsv = sc.W.T @ layout.circ_solve(lam, ds) - sc.W.T @ (sc.W @ dz)
            dkappa = (dtk - kappa * dtau) / tau
            return dx, dy, dz, dsv, dtau, dkappa

        # predictor
        try:
            dxa, dya, dza, dsa, dta, dka = direction(0.0, 0.0, 0.0)
            ds_sc = sc.Winv.T @ dsa
            dz_sc = sc.W @ dza
            alpha = min(layout.max_step(lam, ds_sc), layout.max_step(lam, dz_sc))
            if dta < 0:
                alpha = min(alpha, -tau / dta)
            if dka < 0:
                alpha = min(alpha, -kappa / dka)
            alpha = min(1.0, _STEP * alpha)
            mu_aff = ((lam + alpha * ds_sc) @ (lam + alpha * dz_sc)
                      + (tau + alpha * dta) * (kappa + alpha * dka)) / (deg + 1)
            sigma = min(0.99, max(0.0, (mu_aff / mu)) ** 3)

            # corrector
            corr_s = layout.circ(ds_sc, dz_sc)
            corr_tk = dta * dka
            dx, dy, dz, dsv, dtau, dkappa = direction(sigma, corr_s, corr_tk)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError,
                ValueError) as exc:
            _trace('direction failure', exc)
            break
        ds_sc = sc.Winv.T @ dsv
        dz_sc = sc.W @ dz
        alpha = min(layout.max_step(lam, ds_sc), layout.max_step(lam, dz_sc))
        if dtau < 0:
            alpha = min(alpha, -tau / dtau)
        if dkappa < 0:
            alpha = min(alpha, -kappa / dkappa)
        alpha = min(1.0, _STEP * alpha)
        if not np.isfinite(alpha) or alpha < 1e-12:
            _trace('tiny alpha', alpha)
            break

        x = x + alpha * dx
        y = y + alpha * dy if p else y
        z = z + alpha * dz
        s = s + alpha * dsv
        tau += alpha * dtau
        kappa += alpha * dkappa
        if tau <= 0 or kappa < 0 or layout.margin(s) <= 0 or layout.margin(z) <= 0:
            # should not happen with fraction-to-boundary steps
            _trace('left cone', tau, kappa, layout.margin(s), layout.margin(z))
            break

    if best is None:
        raise NumericalFailure("interior-point iteration produced no iterate")
    # classify the stopped iterate
    if best.relgap <= 1e3 * reltol and best.pres <= 1e2 * feastol \
            and best.dres <= 1e2 * feastol \
            and np.linalg.norm(best.x, np.inf) > 1e6 * (norm_b + norm_h):
        best.status = "near_unattained"
    return best


def _push_interior(layout: _Layout, v: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Shift a warm-start cone point into the interior, block by block,
    so that each block keeps a margin proportional to its own scale."""
    out = v.copy()
    for b in layout.blocks:
        u = out[b.sl]
        if b.kind == "nn":
            mean = float(np.mean(np.abs(u)))
            margin = float(np.min(u))
        elif b.kind == "soc":
            mean = abs(float(u[0]))
            margin = float(u[0] - np.linalg.norm(u[1:]))
        else:
            S = smat(u, b.order)
            mean = float(np.trace(S)) / b.order
            margin = float(np.linalg.eigvalsh(S)[0])
        target = 0.05 * (abs(mean) + 1.0)
        if margin < target:
            out[b.sl] = u + (target - margin) * e[b.sl]
    return out


class _KktFactor:
    """Factorization of the reduced Newton system with mixed-precision
    iterative refinement.

    Solves::

        [0   A.T  G.T ] [ux]   [rx]
        [A   0    0   ] [uy] = [ry]
        [G   0   -WtW ] [uz]   [rz]

    through the scaled rows ``Gs = inv(W).T G`` (so the (1,1) Schur block is
    the Gram matrix ``Gs.T Gs``, formed stably), then refines against the
    unreduced equations with residuals accumulated in extended precision.
    The scaled system loses roughly half the conditioning of the explicit
    ``G.T inv(WtW) G`` form, which is what lets path solves reach relative
    gaps near 1e-11.
    """

    def __init__(self, G: np.ndarray, A: np.ndarray, Winv: np.ndarray,
                 WtW: np.ndarray):
        self.G, self.A, self.WtW = G, A, WtW
        self.Winv = Winv
        self.Gs = Winv.T @ G
        nx, p = G.shape[1], A.shape[0]
        m = G.shape[0]
        self.nx, self.p, self.m = nx, p, m
        # scaled augmented form: substituting the scaled dual direction for
        # uz puts -I in the cone block, so the system's conditioning grows
        # like the scaling's (not its square)
        N = nx + p + m
        K = np.zeros((N, N))
        K[:nx, :nx] = 1e-14 * np.eye(nx)
        if p:
            K[:nx, nx:nx + p] = A.T
            K[nx:nx + p, :nx] = A
        K[:nx, nx + p:] = self.Gs.T
        K[nx + p:, :nx] = self.Gs
        K[nx + p:, nx + p:] = -np.eye(m)
        if not np.all(np.isfinite(K)):
            raise np.linalg.LinAlgError("scaling overflowed")
        with warnings.catch_warnings():
            # a singular factorization surfaces as non-finite solves, which
            # the refinement loop and the caller's guards handle
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            self.lu = scipy.linalg.lu_factor(K)
        long = np.longdouble
        self._G_l = G.astype(long)
        self._A_l = A.astype(long) if p else None
        self._WtW_l = WtW.astype(long)

    def _solve_once(self, rx, ry, rz):
        rhs = np.empty(self.nx + self.p + self.m)
        with np.errstate(all="ignore"):
            rhs[:self.nx] = rx
            if self.p:
                rhs[self.nx:self.nx + self.p] = ry
            rhs[self.nx + self.p:] = self.Winv.T @ rz
            if not np.all(np.isfinite(rhs)):
                raise np.linalg.LinAlgError("non-finite reduced right-hand side")
            sol = scipy.linalg.lu_solve(self.lu, rhs)
            ux = sol[:self.nx]
            uy = sol[self.nx:self.nx + self.p]
            uz = self.Winv @ sol[self.nx + self.p:]
        return ux, uy, uz

    def _residual(self, rx, ry, rz, ux, uy, uz):
        long = np.longdouble
        ux_l, uz_l = ux.astype(long), uz.astype(long)
        e1 = rx.astype(long) - self._G_l.T @ uz_l
        if self.p:
            e1 -= self._A_l.T @ uy.astype(long)
            e2 = ry.astype(long) - self._A_l @ ux_l
        else:
            e2 = np.zeros(0)
        e3 = rz.astype(long) - (self._G_l @ ux_l - self._WtW_l @ uz_l)
        return e1, e2, e3

    def solve(self, rx, ry, rz):
        ry = np.asarray(ry, dtype=float)
        if not (np.all(np.isfinite(rx)) and np.all(np.isfinite(rz))):
            raise np.linalg.LinAlgError("non-finite right-hand side")
        ux, uy, uz = self._solve_once(rx, ry, rz)
        if not np.all(np.isfinite(ux)):
            raise np.linalg.LinAlgError("singular reduced system")
        best = (ux, uy, uz)
        best_norm = math.inf
        for _ in range(_REFINE_ROUNDS):
            e1, e2, e3 = self._residual(rx, ry, rz, ux, uy, uz)
            norm = max(float(np.max(np.abs(e1))) if e1.size else 0.0,
                       float(np.max(np.abs(e2))) if e2.size else 0.0,
                       float(np.max(np.abs(e3))) if e3.size else 0.0)
            if norm < best_norm:
                best, best_norm = (ux, uy, uz), norm
            if norm < 1e-14 * (1.0 + float(np.max(np.abs(rx)))):
                break
            cx, cy, cz = self._solve_once(e1.astype(float), e2.astype(float),
                                          e3.astype(float))
            ux = ux + cx
            uy = uy + cy
            uz = uz + cz
        e1, e2, e3 = self._residual(rx, ry, rz, ux, uy, uz)
        norm = max(float(np.max(np.abs(e1))) if e1.size else 0.0,
                   float(np.max(np.abs(e2))) if e2.size else 0.0,
                   float(np.max(np.abs(e3))) if e3.size else 0.0)
        if norm < best_norm:
            best = (ux, uy, uz)
        return best
