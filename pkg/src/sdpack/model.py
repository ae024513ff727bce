"""Problem and solution data types with JSON serialization.

Documents are plain JSON objects with a top-level ``"kind"`` discriminator:

* ``"packing"``   -- ``{"C": [[..]], "constraints": [{"M": [[..]], "b": x}]}``
* ``"combined"``  -- packing fields plus ``"R0"``, ``"R"``, ``"h0"``, ``"h"``
  (and optionally a redundant ``"H"``, validated against the ``h`` columns)
* ``"design"``    -- ``{"A": [[[..]]] | "M": [[[..]]], "K": [[..]],
  "criterion": "c"|"a"|"e", "resource": {"P": [[..]], "d": [..]}}``

Matrices are dense row-major arrays of doubles; ``json.dumps`` emits the
shortest exact decimal representation, so a parse/serialize round trip
reproduces every entry bit for bit.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import SchemaError, ValidationError


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    UNBOUNDED = "unbounded"
    INFEASIBLE = "infeasible"
    ASYMPTOTIC_SUP = "asymptotic_sup"
    NEAR_UNATTAINED = "near_unattained"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class KktResiduals:
    """Max-norm residuals of the three optimality blocks."""

    primal: float
    dual: float
    complementarity: float

    def max(self) -> float:
        return max(self.primal, self.dual, self.complementarity)

    def passes(self, tol: float, scale: float = 1.0) -> bool:
        return self.max() <= tol * scale


@dataclass(frozen=True)
class PackingProblem:
    """Data of ``max <C, X> s.t. <M_i, X> <= b_i, X PSD`` with C, M_i PSD."""

    C: np.ndarray
    mats: tuple[np.ndarray, ...]
    b: np.ndarray

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @property
    def l(self) -> int:
        return len(self.mats)

    def mat_sum(self) -> np.ndarray:
        return linalg.symmetrize(sum(self.mats))


@dataclass(frozen=True)
class CombinedProblem:
    """Packing data extended with a second PSD variable and free variables.

    Constraints read ``<M_i, X> <= b_i + <R_i, Y> + h_i . lam`` with objective
    ``<C, X> + <R0, Y> + h0 . lam``.  The ``R`` matrices are symmetric but not
    required PSD; ``H`` stacks the ``h_i`` as columns (q x l), kept redundantly
    and validated consistent.
    """

    C: np.ndarray
    mats: tuple[np.ndarray, ...]
    b: np.ndarray
    R0: np.ndarray
    Rs: tuple[np.ndarray, ...]
    h0: np.ndarray
    hs: tuple[np.ndarray, ...]
    H: np.ndarray

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @property
    def l(self) -> int:
        return len(self.mats)

    @property
    def p(self) -> int:
        return self.R0.shape[0]

    @property
    def q(self) -> int:
        return self.h0.shape[0]


@dataclass(frozen=True)
class ResourceBlock:
    """Linear resource constraints ``P w <= d`` with ``P`` entrywise nonnegative."""

    P: np.ndarray
    d: np.ndarray


class Criterion(str, enum.Enum):
    C_OPT = "c"
    A_OPT = "a"
    E_OPT = "e"


@dataclass(frozen=True)
class DesignProblem:
    """Experimental-design data: observation maps and target functionals.

    Either the observation matrices ``obs[i]`` (rows x n) or the information
    matrices ``mats[i] = obs[i].T @ obs[i]`` may be given; when both are
    present they are validated against each other.  ``K`` holds the target
    functionals as columns (n x r).
    """

    K: np.ndarray
    criterion: Criterion
    obs: tuple[np.ndarray, ...] | None = None
    mats: tuple[np.ndarray, ...] = ()
    resource: ResourceBlock | None = None

    @property
    def n(self) -> int:
        return self.K.shape[0]

    @property
    def r(self) -> int:
        return self.K.shape[1]

    @property
    def l(self) -> int:
        return len(self.mats)

    def observation(self, i: int) -> np.ndarray:
        """A_i with ``A_i.T @ A_i = M_i``, factored on demand when absent."""
        if self.obs is not None:
            return self.obs[i]
        return linalg.psd_factor(self.mats[i])


@dataclass(frozen=True)
class Solution:
    """Primal/dual solution of a packing problem.

    ``route`` records how the solution was produced ("socp", "eps-path",
    "direct", "bm", "trivial"); ``path_values`` the objective sequence of a
    perturbation path when one was followed; ``certified`` is set by the
    non-convex factorized backend only.
    """

    X: np.ndarray
    objective: float
    numerical_rank: int
    mu: np.ndarray
    status: Status
    kkt_residuals: KktResiduals | None = None
    route: str = ""
    path_values: tuple[float, ...] = field(default_factory=tuple)
    certified: bool | None = None


@dataclass(frozen=True)
class CombinedSolution:
    """Solution of a combined problem, with the trace-cap path values."""

    X: np.ndarray
    Y: np.ndarray
    lam: np.ndarray
    objective: float
    status: Status
    gamma: tuple[float, ...] = field(default_factory=tuple)
    ranks: tuple[int, ...] = field(default_factory=tuple)


# ---------------------------------------------------------------------------
# parsing


def _need(doc: dict, key: str):
    if key not in doc:
        raise SchemaError(f"missing required key {key!r}")
    return doc[key]


def _as_matrix(obj, key: str) -> np.ndarray:
    try:
        a = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{key}: not a numeric matrix") from exc
    if a.ndim != 2:
        raise SchemaError(f"{key}: expected a 2-d array, got {a.ndim}-d")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{key}: non-finite entries", witness=key)
    return a

def _as_vector(obj, key: str) -> np.ndarray:
    try:
        a = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{key}: not a numeric vector") from exc
    if a.ndim != 1:
        raise SchemaError(f"{key}: expected a 1-d array, got {a.ndim}-d")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{key}: non-finite entries", witness=key)
    return a


def _sym_psd(obj, key: str) -> np.ndarray:
    m = linalg.symmetrize(_as_matrix(obj, key))
    ok, witness = linalg.is_psd(m)
    if not ok:
        raise ValidationError(f"{key}: not positive semidefinite "
                              f"(min eigenvalue {witness:.3e})", witness=witness)
    return m


def _parse_packing_fields(doc: dict) -> tuple[np.ndarray, tuple, np.ndarray]:
    C = _sym_psd(_need(doc, "C"), "C")
    rows = _need(doc, "constraints")
    if not isinstance(rows, list) or len(rows) < 1:
        raise SchemaError("constraints: expected a non-empty list")
    mats, b = [], []
    for i, row in enumerate(rows):
        if not isinstance(row, dict):
            raise SchemaError(f"constraints[{i}]: expected an object")
        m = _sym_psd(_need(row, "M"), f"constraints[{i}].M")
        if m.shape != C.shape:
            raise ValidationError(
                f"constraints[{i}].M: dimension {m.shape[0]} != {C.shape[0]}",
                witness=(m.shape[0], C.shape[0]))
        mats.append(m)
        bi = _need(row, "b")
        if not isinstance(bi, (int, float)) or not np.isfinite(bi):
            raise SchemaError(f"constraints[{i}].b: expected a finite number")
        b.append(float(bi))
    return C, tuple(mats), np.asarray(b)


def _parse_packing(doc: dict) -> PackingProblem:
    C, mats, b = _parse_packing_fields(doc)
    return PackingProblem(C=C, mats=mats, b=b)


def _parse_combined(doc: dict) -> CombinedProblem:
    C, mats, b = _parse_packing_fields(doc)
    l = len(mats)

    if doc.get("R0") is not None:
        R0 = linalg.symmetrize(_as_matrix(doc["R0"], "R0")) if len(doc["R0"]) else np.zeros((0, 0))
    else:
        R0 = np.zeros((0, 0))
    p = R0.shape[0]
    rs_doc = doc.get("R")
    if rs_doc is None:
        Rs = tuple(np.zeros((p, p)) for _ in range(l))
    else:
        if len(rs_doc) != l:
            raise ValidationError(f"R: expected {l} matrices, got {len(rs_doc)}",
                                  witness=(len(rs_doc), l))
        Rs = []
        for i, ri in enumerate(rs_doc):
            m = linalg.symmetrize(_as_matrix(ri, f"R[{i}]")) if len(ri) else np.zeros((0, 0))
            if m.shape[0] != p:
                raise ValidationError(f"R[{i}]: dimension {m.shape[0]} != {p}",
                                      witness=(m.shape[0], p))
            Rs.append(m)
        Rs = tuple(Rs)

    h0 = _as_vector(doc.get("h0", []), "h0")
    q = h0.shape[0]
    hs_doc = doc.get("h")
    if hs_doc is None and doc.get("H") is not None:
        H_doc = _as_matrix(doc["H"], "H") if len(doc["H"]) else np.zeros((q, l))
        if H_doc.shape != (q, l):
            raise ValidationError(f"H: shape {H_doc.shape} != ({q}, {l})",
                                  witness=(H_doc.shape, (q, l)))
        hs_doc = [list(H_doc[:, j]) for j in range(l)]
    if hs_doc is None:
        hs = tuple(np.zeros(q) for _ in range(l))
    else:
        if len(hs_doc) != l:
            raise ValidationError(f"h: expected {l} vectors, got {len(hs_doc)}",
                                  witness=(len(hs_doc), l))
        hs = []
        for i, hi in enumerate(hs_doc):
            v = _as_vector(hi, f"h[{i}]")
            if v.shape[0] != q:
                raise ValidationError(f"h[{i}]: dimension {v.shape[0]} != {q}",
                                      witness=(v.shape[0], q))
            hs.append(v)
        hs = tuple(hs)

    H = np.column_stack(hs) if l and q else np.zeros((q, l))
    if doc.get("H") is not None:
        H_doc = _as_matrix(doc["H"], "H") if len(doc["H"]) else np.zeros((q, l))
        if H_doc.shape != (q, l):
            raise ValidationError(f"H: shape {H_doc.shape} != ({q}, {l})",
                                  witness=(H_doc.shape, (q, l)))
        if not np.array_equal(H_doc, H):
            j = int(np.argmax(np.any(H_doc != H, axis=0)))
            raise ValidationError(f"H column {j} does not equal h[{j}]", witness=j)
    return CombinedProblem(C=C, mats=mats, b=b, R0=R0, Rs=Rs, h0=h0, hs=hs, H=H)


def _parse_design(doc: dict) -> DesignProblem:
    K = _as_matrix(_need(doc, "K"), "K")
    if K.shape[1] < 1:
        raise ValidationError("K: needs at least one column", witness=K.shape)
    n = K.shape[0]

    crit_doc = _need(doc, "criterion")
    try:
        criterion = Criterion(crit_doc)
    except ValueError:
        raise SchemaError(f"criterion: expected one of 'c', 'a', 'e', got {crit_doc!r}")
    if criterion is Criterion.C_OPT and K.shape[1] != 1:
        raise ValidationError("criterion 'c' requires a single target column",
                              witness=K.shape[1])

    obs = None
    if doc.get("A") is not None:
        obs = []
        for i, ai in enumerate(doc["A"]):
            a = _as_matrix(ai, f"A[{i}]")
            if a.shape[1] != n:
                raise ValidationError(f"A[{i}]: {a.shape[1]} columns != {n}",
                                      witness=(a.shape[1], n))
            obs.append(a)
        obs = tuple(obs)

    if doc.get("M") is not None:
        mats = []
        for i, mi in enumerate(doc["M"]):
            m = _sym_psd(mi, f"M[{i}]")
            if m.shape[0] != n:
                raise ValidationError(f"M[{i}]: dimension {m.shape[0]} != {n}",
                                      witness=(m.shape[0], n))
            mats.append(m)
        mats = tuple(mats)
        if obs is not None:
            if len(obs) != len(mats):
                raise ValidationError("A and M have different lengths",
                                      witness=(len(obs), len(mats)))
            for i, (a, m) in enumerate(zip(obs, mats)):
                err = float(np.linalg.norm(a.T @ a - m))
                if err > 1e-8 * max(1.0, float(np.linalg.norm(m))):
                    raise ValidationError(
                        f"A[{i}].T @ A[{i}] differs from M[{i}] by {err:.3e}",
                        witness=err)
    elif obs is not None:
        mats = tuple(linalg.symmetrize(a.T @ a) for a in obs)
    else:
        raise SchemaError("design document needs 'A' or 'M'")
    if len(mats) < 1:
        raise SchemaError("design document needs at least one experiment")

    resource = None
    if doc.get("resource") is not None:
        res = doc["resource"]
        P = _as_matrix(_need(res, "P"), "resource.P")
        d = _as_vector(_need(res, "d"), "resource.d")
        if P.shape[1] != len(mats):
            raise ValidationError(f"resource.P: {P.shape[1]} columns != {len(mats)}",
                                  witness=(P.shape[1], len(mats)))
        if P.shape[0] != d.shape[0]:
            raise ValidationError("resource: P rows != d length",
                                  witness=(P.shape[0], d.shape[0]))
        if np.any(P < 0):
            idx = np.argwhere(P < 0)[0]
            raise ValidationError(f"resource.P has a negative entry at {tuple(idx)}",
                                  witness=tuple(int(v) for v in idx))
        resource = ResourceBlock(P=P, d=d)

    return DesignProblem(K=K, criterion=criterion, obs=obs, mats=mats,
                         resource=resource)


_PROBLEM_PARSERS = {
    "packing": _parse_packing,
    "combined": _parse_combined,
    "design": _parse_design,
}


def parse_problem(text) -> PackingProblem | CombinedProblem | DesignProblem:
    """Parse a JSON document (string or dict) into a validated problem."""
    doc = _load(text)
    kind = _need(doc, "kind")
    parser = _PROBLEM_PARSERS.get(kind)
    if parser is None:
        raise SchemaError(f"unknown problem kind {kind!r}")
    return parser(doc)


def parse_solution(text) -> Solution | CombinedSolution:
    """Parse a JSON solution document."""
    doc = _load(text)
    kind = _need(doc, "kind")
    if kind == "solution":
        kkt = None
        if doc.get("kkt_residuals") is not None:
            r = doc["kkt_residuals"]
            kkt = KktResiduals(primal=float(r["primal"]), dual=float(r["dual"]),
                               complementarity=float(r["complementarity"]))
        status = Status(_need(doc, "status"))
        obj_val = _need(doc, "objective")
        if obj_val is None:
            obj_val = math.inf if status is Status.UNBOUNDED else math.nan
        return Solution(
            X=linalg.symmetrize(_as_matrix(_need(doc, "X"), "X")),
            objective=float(obj_val),
            numerical_rank=int(_need(doc, "numerical_rank")),
            mu=_as_vector(_need(doc, "mu"), "mu"),
            status=status,
            kkt_residuals=kkt)
    if kind == "combined_solution":
        y = doc.get("Y")
        return CombinedSolution(
            X=linalg.symmetrize(_as_matrix(_need(doc, "X"), "X")),
            Y=(linalg.symmetrize(_as_matrix(y, "Y")) if y else np.zeros((0, 0))),
            lam=_as_vector(doc.get("lambda", []), "lambda"),
            objective=float(_need(doc, "objective")),
            status=Status(_need(doc, "status")),
            gamma=tuple(float(g) for g in doc.get("gamma", [])),
            ranks=tuple(int(r) for r in doc.get("ranks", [])))
    raise SchemaError(f"unknown solution kind {kind!r}")


def _load(text) -> dict:
    if isinstance(text, dict):
        return text
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("top level must be a JSON object")
    return doc


# ---------------------------------------------------------------------------
# serialization


def _mat(a: np.ndarray) -> list:
    return [[float(v) for v in row] for row in np.asarray(a)]


def _vec(a: np.ndarray) -> list:
    return [float(v) for v in np.asarray(a)]


def to_document(obj) -> dict:
    """Convert a problem or solution to a JSON-ready dict."""
    if isinstance(obj, PackingProblem):
        return {
            "kind": "packing",
            "C": _mat(obj.C),
            "constraints": [{"M": _mat(m), "b": float(bi)}
                            for m, bi in zip(obj.mats, obj.b)],
        }
    if isinstance(obj, CombinedProblem):
        return {
            "kind": "combined",
            "C": _mat(obj.C),
            "constraints": [{"M": _mat(m), "b": float(bi)}
                            for m, bi in zip(obj.mats, obj.b)],
            "R0": _mat(obj.R0),
            "R": [_mat(r) for r in obj.Rs],
            "h0": _vec(obj.h0),
            "h": [_vec(h) for h in obj.hs],
            "H": _mat(obj.H),
        }
    if isinstance(obj, DesignProblem):
        doc = {
            "kind": "design",
            "K": _mat(obj.K),
            "criterion": obj.criterion.value,
            "M": [_mat(m) for m in obj.mats],
        }
        if obj.obs is not None:
            doc["A"] = [_mat(a) for a in obj.obs]
        if obj.resource is not None:
            doc["resource"] = {"P": _mat(obj.resource.P), "d": _vec(obj.resource.d)}
        return doc
    if isinstance(obj, Solution):
        obj_val = float(obj.objective)
        doc = {
            "kind": "solution",
            "X": _mat(obj.X),
            "objective": obj_val if math.isfinite(obj_val) else None,
            "numerical_rank": int(obj.numerical_rank),
            "mu": _vec(obj.mu),
            "status": obj.status.value,
        }
        if obj.kkt_residuals is not None:
            doc["kkt_residuals"] = {
                "primal": obj.kkt_residuals.primal,
                "dual": obj.kkt_residuals.dual,
                "complementarity": obj.kkt_residuals.complementarity,
            }
        return doc
    if isinstance(obj, CombinedSolution):
        return {
            "kind": "combined_solution",
            "X": _mat(obj.X),
            "Y": _mat(obj.Y),
            "lambda": _vec(obj.lam),
            "objective": float(obj.objective),
            "status": obj.status.value,
            "gamma": [float(g) for g in obj.gamma],
            "ranks": [int(r) for r in obj.ranks],
        }
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def serialize(obj) -> str:
    """JSON text for a problem or solution; stable key order."""
    return json.dumps(to_document(obj), indent=2, sort_keys=True)
