"""Acceptance criteria, one test per criterion, each at its stated
tolerance.  Every test prints a single PASS line on success (run with
``pytest -s`` to see them); a failed assertion is the FAIL signal.
"""

import numpy as np
import pytest
from instances import bounded_packing, subspace_packing, unbounded_packing

from sdpack import analysis, linalg
from sdpack import reduce as rd
from sdpack import solve as sv
from sdpack.model import Criterion, DesignProblem, ResourceBlock, Status, parse_problem


def tangent_combined():
    c = (np.sqrt(3) / 10.0) * np.array([9.0, 1.0])
    return parse_problem({
        "kind": "combined",
        "C": [[float(v) for v in row] for row in np.outer(c, c)],
        "constraints": [
            {"M": [[0.0, 0.0], [0.0, 0.0]], "b": 1.0},
            {"M": [[1.0, 0.0], [0.0, 0.0]], "b": 1.0},
            {"M": [[0.0, 0.0], [0.0, 1.0]], "b": 1.0},
        ],
        "h0": [-1.0, -3.0],
        "H": [[1.0, 0.0, 3.0], [0.0, 1.0, 1.0]],
    })


def test_criterion_1_golden_instance():
    cmb = tangent_combined()
    # (a) the known multipliers are dual feasible and price to 31/10
    mu = np.array([0.1, 2.7, 0.3])
    slack = sum(m * M for m, M in zip(mu, cmb.mats)) - cmb.C
    assert np.linalg.eigvalsh(slack)[0] >= -1e-9
    assert np.max(np.abs(cmb.h0 + cmb.H @ mu)) <= 1e-12
    assert abs(mu @ cmb.b - 3.1) <= 1e-12

    # (b) the analytic feasible sequence approaches the optimum
    k = 1.0e6
    x = np.array([np.sqrt(3.0 + k), np.sqrt(k)])
    lam = np.array([-1.0, k + 2.0])
    value = x @ cmb.C @ x + cmb.h0 @ lam
    assert abs(value - 3.1) <= 1e-3
    for m, bi, hi in zip(cmb.mats, cmb.b, cmb.hs):
        assert x @ m @ x <= bi + hi @ lam + 1e-9

    # (c) the trace-cap path converges without attaining
    sol = sv.solve_combined_eta(cmb)
    diffs = np.diff(sol.gamma)
    assert np.all(diffs >= -1e-9)
    assert abs(sol.objective - 3.1) <= 1e-3
    assert sol.status is Status.ASYMPTOTIC_SUP
    assert all(r <= 1 for r in sol.ranks)
    print("\nACCEPTANCE 1 PASS: golden 2x2 instance "
          f"(path value {sol.objective:.6f}, every iterate rank <= 1)")


def test_criterion_2_low_rank_suite():
    rng = np.random.default_rng(2024)
    for trial in range(50):
        n = int(rng.integers(2, 9))
        l = int(rng.integers(1, 7))
        rank_c = min(int(rng.integers(1, 4)), n)
        prob = bounded_packing(rng, n, l, rank_c)
        sol = sv.solve_packing_lowrank(prob)
        oracle = sv.solve_sdp(prob)
        rel = abs(sol.objective - oracle.objective) / max(1.0, abs(oracle.objective))
        assert rel <= 1e-5, f"trial {trial}: value off by {rel:.2e}"
        assert linalg.rank_tol(sol.X, 1e-6) <= rank_c, \
            f"trial {trial}: rank {linalg.rank_tol(sol.X, 1e-6)} > {rank_c}"
    print("\nACCEPTANCE 2 PASS: 50/50 low-rank solves match the dense oracle "
          "at 1e-5 with rank <= rank(C)")


def test_criterion_3_rank_one_equivalence():
    rng = np.random.default_rng(31)
    for trial in range(25):
        n = int(rng.integers(2, 7))
        l = int(rng.integers(1, 6))
        prob = bounded_packing(rng, n, l, 1)
        sol = sv.solve_packing_lowrank(prob)
        assert sol.route == "socp", f"trial {trial} took route {sol.route}"
        oracle = sv.solve_sdp(prob)
        rel = abs(sol.objective - oracle.objective) / max(1.0, abs(oracle.objective))
        assert rel <= 1e-6, f"trial {trial}: value off by {rel:.2e}"
        _, ok = sv.kkt_check(prob, sol.X, sol.mu, 1e-6)
        assert ok, f"trial {trial}: optimality check failed"
    print("\nACCEPTANCE 3 PASS: 25/25 cone-program solutions match the oracle "
          "at 1e-6 and verify at 1e-6")


def test_criterion_4_certificates():
    rng = np.random.default_rng(44)
    for trial in range(20):
        n = int(rng.integers(3, 8))
        l = int(rng.integers(1, 5))
        prob = unbounded_packing(rng, n, l)
        cert = analysis.check_bounded(prob)
        assert not cert.bounded
        h = cert.ray
        worst = max(np.linalg.norm(linalg.psd_factor(m) @ h) for m in prob.mats)
        assert worst <= 1e-8 * np.linalg.norm(h)
        X = 1e6 * np.outer(h, h)
        assert all(np.trace(m @ X) <= bi + 1e-6
                   for m, bi in zip(prob.mats, prob.b))
        assert np.trace(prob.C @ X) >= 1e4 * np.linalg.norm(prob.C)
    for trial in range(20):
        prob = bounded_packing(rng, int(rng.integers(2, 8)),
                               int(rng.integers(1, 6)), 2)
        cert = analysis.check_bounded(prob)
        assert cert.bounded
        ok, _ = linalg.is_psd(cert.lam * prob.mat_sum() - prob.C, tol=1e-8)
        assert ok
    print("\nACCEPTANCE 4 PASS: 20 unbounded rays verified and scaled by 1e6, "
          "20 scalar dual bounds verified PSD at 1e-8")


def test_criterion_5_projection():
    rng = np.random.default_rng(77)
    checked = 0
    while checked < 20:
        n = int(rng.integers(4, 8))
        k = int(rng.integers(2, n - 1))
        l = int(rng.integers(2, 6))
        prob = subspace_packing(rng, n, k, l, 2, zero_b=1)
        assert linalg.rank_tol(prob.mat_sum()) < n
        assert float(np.min(prob.b)) == 0.0
        red, lift = rd.project_packing(prob)
        if red.empty:
            continue
        inner = red.problem
        # strict primal feasibility witness
        assert all(red.strict_eps * np.trace(m) < bi
                   for m, bi in zip(inner.mats, inner.b))
        # strict dual feasibility margin
        assert red.dual_margin > 0
        # lift preserves objective and feasibility
        Z = 0.5 * red.strict_eps * np.eye(inner.n)
        X = rd.lift_solution(Z, lift)
        inner_val = float(np.trace(inner.C @ Z))
        assert abs(np.trace(prob.C @ X) - inner_val) \
            <= 1e-10 * max(1.0, abs(inner_val))
        assert all(np.trace(m @ X) <= bi + 1e-8
                   for m, bi in zip(prob.mats, prob.b))
        checked += 1
    print("\nACCEPTANCE 5 PASS: 20 projections strictly feasible on both "
          "sides with exact lifts")


def _variance_grid(K, mats, objective, step=1e-4):
    best, best_w = np.inf, None
    for w1 in np.arange(step, 1.0, step):
        w = [w1, 1.0 - w1]
        info = linalg.symmetrize(sum(wi * m for wi, m in zip(w, mats)))
        U = linalg.range_basis(info)
        resid = K - U @ (U.T @ K)
        if np.linalg.norm(resid) > 1e-9 * max(1.0, np.linalg.norm(K)):
            continue
        val = objective(K.T @ linalg.pinv(info) @ K)
        if val < best:
            best, best_w = val, np.array(w)
    return best, best_w


def test_criterion_6_design_oracles():
    M1, M2 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    # single-functional design
    K = np.array([[1.0], [1.0]])
    oracle, w_star = _variance_grid(K, [M1, M2], lambda cov: float(cov[0, 0]))
    design = DesignProblem(K=K, criterion=Criterion.C_OPT, mats=(M1, M2))
    sol = sv.solve_packing_lowrank(rd.build_c_optimal(design))
    w = sv.recover_design(sol.mu, np.ones(2))
    assert sol.objective == pytest.approx(4.0, abs=1e-5)
    assert np.max(np.abs(w - w_star)) <= 1e-3

    # trace criterion
    KA = np.eye(2)
    oracle_a, _ = _variance_grid(KA, [M1, M2], lambda cov: float(np.trace(cov)))
    designA = DesignProblem(K=KA, criterion=Criterion.A_OPT, mats=(M1, M2))
    solA = sv.solve_packing_lowrank(rd.build_a_optimal(designA))
    assert solA.objective == pytest.approx(oracle_a, abs=1e-4)
    assert solA.objective == pytest.approx(4.0, abs=1e-4)

    # extreme-eigenvalue criterion
    oracle_e, _ = _variance_grid(KA, [M1, M2],
                                 lambda cov: float(np.linalg.eigvalsh(cov)[-1]))
    designE = DesignProblem(K=KA, criterion=Criterion.E_OPT, mats=(M1, M2))
    solE = sv.solve_packing_lowrank(rd.build_e_optimal(designE))
    assert solE.objective == pytest.approx(oracle_e, abs=1e-4)
    assert solE.objective == pytest.approx(2.0, abs=1e-4)
    assert solE.numerical_rank == 2

    # resource-constrained pair: box caps, oracle over the box grid
    designR = DesignProblem(K=K, criterion=Criterion.C_OPT, mats=(M1, M2),
                            resource=ResourceBlock(P=np.eye(2), d=np.ones(2)))
    pair = rd.build_resource_constrained(designR)
    pres = sv.solve_socp(pair.primal)
    dres = sv.solve_socp(pair.dual)
    assert abs(pres.value - dres.value) <= 1e-6
    grid = np.arange(1e-2, 1.0 + 1e-9, 1e-2)
    box_oracle = min(float(K[:, 0] @ linalg.pinv(w1 * M1 + w2 * M2) @ K[:, 0])
                     for w1 in grid for w2 in grid)
    assert pres.value ** 2 == pytest.approx(box_oracle, abs=1e-3)
    print("\nACCEPTANCE 6 PASS: design criteria 4 / 4 / 2 with grid-matched "
          "weights; resource pair strong duality at 1e-6")


def test_criterion_7_gap_sandwich():
    rng = np.random.default_rng(71)
    thetas = np.linspace(0.0, np.pi, 10 ** 4, endpoint=False)
    for trial in range(10):
        prob = bounded_packing(rng, 2, int(rng.integers(1, 5)), 2)
        v_star = sv.solve_sdp(prob).objective
        v_one = 0.0
        for th in thetas:
            u = np.array([np.cos(th), np.sin(th)])
            den = np.array([u @ m @ u for m in prob.mats])
            with np.errstate(divide="ignore"):
                rho2 = float(np.min(np.where(den > 1e-300, prob.b / den,
                                             np.inf)))
            if np.isfinite(rho2):
                v_one = max(v_one, rho2 * float(u @ prob.C @ u))
        factor = analysis.nrt_bound(prob).factor
        assert v_star >= v_one - 1e-6, f"trial {trial}"
        assert v_one >= v_star / factor - 1e-6, f"trial {trial}"
    print("\nACCEPTANCE 7 PASS: 10/10 rank-one gap sandwiches hold "
          "against the angular brute force")


def test_criterion_8_path_monotonicity():
    rng = np.random.default_rng(88)
    eps_paths = 0
    for trial in range(8):
        n = int(rng.integers(3, 8))
        prob = bounded_packing(rng, n, int(rng.integers(1, 6)),
                               min(int(rng.integers(2, 4)), n))
        sol = sv.solve_packing_lowrank(prob)
        if sol.route != "eps-path":
            continue
        eps_paths += 1
        values = np.asarray(sol.path_values)
        assert np.all(np.diff(values) >= -1e-9), \
            f"trial {trial}: perturbation path decreased"
    assert eps_paths >= 3
    cmb = tangent_combined()
    sol = sv.solve_combined_eta(cmb)
    assert np.all(np.diff(sol.gamma) >= -1e-9)
    print(f"\nACCEPTANCE 8 PASS: {eps_paths} perturbation paths nonincreasing "
          "in the perturbation and the trace-cap path nondecreasing, "
          "both within 1e-9")
