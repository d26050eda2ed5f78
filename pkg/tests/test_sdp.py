import numpy as np
import pytest

from switchlqr.model import mode_submatrices, riccati_oracle
from switchlqr.sdp import (ExtractionError, SdpInfeasibleError, SdpProblem, SdpSolution,
                           dump_problem, extract_gain, solve_exact_sdp, solve_relaxed_dual,
                           solve_relaxed_sdp)

from helpers import dlqr_reference


def scalar_theta(a=0.5, b=1.0):
    return np.array([[a], [b]])


def stable_random_instance(rng, n=2, d=2):
    A = rng.standard_normal((n, n))
    A *= 0.8 / max(np.abs(np.linalg.eigvals(A)).max(), 1e-9)
    B = rng.standard_normal((n, d))
    Q = np.eye(n)
    R = np.eye(d)
    return A, B, Q, R


class TestExactSdp:
    def test_scalar_objective_matches_riccati_root(self):
        sol = solve_exact_sdp(scalar_theta(), np.eye(1), np.eye(1), np.eye(1), tol=1e-11)
        assert sol.objective == pytest.approx(1.1328, abs=5e-5)
        assert sol.residual < 1e-8

    def test_no_dynamics_all_cost_in_noise(self):
        Q = np.diag([2.0, 5.0])
        Theta = np.vstack([np.zeros((2, 2)), np.eye(2)])
        W = 0.04 * np.eye(2)
        sol = solve_exact_sdp(Theta, Q, np.eye(2), W, tol=1e-11)
        assert sol.objective == pytest.approx(0.04 * 7.0, rel=1e-6)
        K = extract_gain(sol, n=2)
        assert np.allclose(K, 0.0, atol=1e-6)

    def test_benchmark_modes_match_riccati(self, experiment_system):
        sigma = experiment_system.sigma_w
        for mode in experiment_system.modes:
            _, Ri = mode_submatrices(experiment_system, mode)
            Theta = experiment_system.theta_star(mode)
            sol = solve_exact_sdp(Theta, experiment_system.Q, Ri,
                                  sigma ** 2 * np.eye(3), tol=1e-11)
            K_sdp = extract_gain(sol, n=3)
            K_ref, P_ref, J_ref = riccati_oracle(Theta, experiment_system.Q, Ri, sigma,
                                                 tol=1e-12)
            assert np.linalg.norm(K_sdp - K_ref, 2) <= 1e-5
            assert abs(sol.objective - J_ref) / J_ref <= 1e-5
            assert sol.dual_P is not None
            assert np.linalg.norm(sol.dual_P - P_ref, 2) / np.linalg.norm(P_ref, 2) < 1e-6

    def test_unstabilizable_instance_infeasible(self):
        Theta = np.array([[2.0], [0.0]])  # a=2, b=0
        with pytest.raises(SdpInfeasibleError):
            solve_exact_sdp(Theta, np.eye(1), np.eye(1), np.eye(1))


class TestRelaxedSdp:
    def test_mu_zero_coincides_with_exact(self, rng):
        A, B, Q, R = stable_random_instance(rng)
        Theta = np.vstack([A.T, B.T])
        W = 0.25 * np.eye(2)
        exact = solve_exact_sdp(Theta, Q, R, W, tol=1e-11)
        prob = SdpProblem(theta_hat=Theta, Q=Q, R_i=R, V=np.eye(4), mu=0.0, W=W)
        relaxed = solve_relaxed_sdp(prob, tol=1e-11)
        assert relaxed.objective == pytest.approx(exact.objective, abs=1e-8)

    def test_small_mu_gain_continuity(self, experiment_system):
        sigma = experiment_system.sigma_w
        Theta = experiment_system.theta_star()
        K_ref, _, _ = riccati_oracle(Theta, experiment_system.Q, experiment_system.R, sigma)
        prob = SdpProblem(theta_hat=Theta, Q=experiment_system.Q, R_i=experiment_system.R,
                          V=np.eye(6), mu=1e-8, W=sigma ** 2 * np.eye(3))
        sol = solve_relaxed_sdp(prob, tol=1e-11)
        assert np.linalg.norm(extract_gain(sol, 3) - K_ref, 2) < 1e-4

    def test_objective_nonincreasing_in_mu(self, rng):
        A, B, Q, R = stable_random_instance(rng)
        Theta = np.vstack([A.T, B.T])
        V = np.eye(4)
        prev = np.inf
        for mu in (0.0, 1e-4, 1e-3, 1e-2, 1e-1):
            sol = solve_relaxed_sdp(SdpProblem(Theta, Q, R, V, mu, np.eye(2)), tol=1e-10)
            assert sol.objective <= prev + 1e-7
            prev = sol.objective

    def test_trace_norm_bound_on_solutions(self, experiment_system):
        # ||Sigma||_* <= J / alpha0 for the exact program at the true parameters
        sigma = experiment_system.sigma_w
        for mode in experiment_system.modes:
            _, Ri = mode_submatrices(experiment_system, mode)
            Theta = experiment_system.theta_star(mode)
            sol = solve_exact_sdp(Theta, experiment_system.Q, Ri, sigma ** 2 * np.eye(3),
                                  tol=1e-11)
            trace_norm = float(np.sum(np.abs(np.linalg.eigvalsh(sol.Sigma))))
            assert trace_norm <= sol.objective / experiment_system.alpha0 * (1 + 1e-6)

    def test_infeasible_carries_diagnostics(self):
        # an unstabilizable center with no uncertainty slack is infeasible;
        # any positive mu restores feasibility through the relaxation term
        Theta = np.array([[2.0], [0.0]])
        V = np.diag([1.0, 4.0])
        prob = SdpProblem(Theta, np.eye(1), np.eye(1), V, mu=0.0, W=np.eye(1))
        with pytest.raises(SdpInfeasibleError) as exc:
            solve_relaxed_sdp(prob)
        assert exc.value.mu == 0.0
        assert exc.value.cond_V == pytest.approx(4.0, rel=1e-9)
        relaxed = solve_relaxed_sdp(SdpProblem(Theta, np.eye(1), np.eye(1), V, 1e-6,
                                               np.eye(1)))
        assert relaxed.objective > 0


class TestExtractGain:
    def test_zero_cross_block_gives_zero_gain(self):
        Sigma = np.diag([1.0, 2.0, 3.0, 4.0])
        sol = SdpSolution(Sigma=Sigma, objective=0.0, residual=0.0, dual_P=np.eye(2),
                          status="optimal")
        assert np.array_equal(extract_gain(sol), np.zeros((2, 2)))

    def test_recovers_gain_from_constructed_covariance(self, rng):
        K0 = rng.standard_normal((2, 3))
        X = np.eye(3) + 0.3 * np.ones((3, 3))
        Sigma = np.block([[X, X @ K0.T], [K0 @ X, K0 @ X @ K0.T]])
        sol = SdpSolution(Sigma=Sigma, objective=0.0, residual=0.0, dual_P=np.eye(3),
                          status="optimal")
        assert np.allclose(extract_gain(sol), K0, atol=1e-12)

    def test_singular_sigma_xx_rejected(self):
        Sigma = np.zeros((3, 3))
        sol = SdpSolution(Sigma=Sigma, objective=0.0, residual=0.0, dual_P=np.eye(2),
                          status="optimal")
        with pytest.raises(ExtractionError):
            extract_gain(sol)


class TestRelaxedDual:
    def test_mu_zero_matches_riccati_cost_to_go(self, experiment_system):
        sigma = experiment_system.sigma_w
        Theta = experiment_system.theta_star()
        _, P_ref, J_ref = riccati_oracle(Theta, experiment_system.Q, experiment_system.R,
                                         sigma, tol=1e-12)
        prob = SdpProblem(Theta, experiment_system.Q, experiment_system.R, np.eye(6),
                          mu=0.0, W=sigma ** 2 * np.eye(3))
        P = solve_relaxed_dual(prob, tol=1e-11)
        assert np.linalg.norm(P - P_ref, 2) / np.linalg.norm(P_ref, 2) < 1e-4

    def test_duality_gap_and_lower_bound(self, rng):
        # random feasible instances: dual objective matches primal, P is PSD and
        # clears alpha0/2 when the regularizer dominates the uncertainty weight
        for _ in range(5):
            A, B, Q, R = stable_random_instance(rng)
            Theta = np.vstack([A.T, B.T])
            W = 0.5 * np.eye(2)
            lam = 50.0
            mu = 1e-3
            prob = SdpProblem(Theta, Q, R, lam * np.eye(4), mu, W)
            primal = solve_relaxed_sdp(prob, tol=1e-10)
            P = solve_relaxed_dual(prob, tol=1e-10)
            gap = abs(float(np.trace(P @ W)) - primal.objective)
            assert gap <= 1e-6 * max(1.0, primal.objective)
            evals = np.linalg.eigvalsh(P)
            assert evals[0] >= -1e-9
            alpha0 = 1.0  # Q = R = I
            assert evals[0] >= alpha0 / 2 - 1e-6

    def test_fixed_point_agrees_with_linear_trace_formulation(self, rng):
        # independent route: since P >= 0, the trace-norm coefficient is linear
        import cvxpy as cp

        A, B, Q, R = stable_random_instance(rng, n=2, d=1)
        Theta = np.vstack([A.T, B.T])
        W = np.eye(2)
        V = 5.0 * np.eye(3)
        mu = 0.05
        prob = SdpProblem(Theta, Q, R, V, mu, W)
        P_fp = solve_relaxed_dual(prob, tol=1e-11)

        P = cp.Variable((2, 2), PSD=True)
        lhs = cp.bmat([[Q - P, np.zeros((2, 1))], [np.zeros((1, 2)), R]]) + Theta @ P @ Theta.T
        cons = [lhs >> mu * cp.trace(P) * np.linalg.inv(V)]
        cp.Problem(cp.Maximize(cp.trace(P @ W)), cons).solve(
            solver=cp.CLARABEL, tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11)
        assert np.linalg.norm(P_fp - P.value, 2) < 1e-5


class TestOrderingAndFeasibility:
    def test_constructed_covariance_is_primal_feasible(self, rng):
        # E(K) built from a stabilizing K satisfies the exact constraint
        import scipy.linalg as sla

        A, B, Q, R = stable_random_instance(rng)
        K, _ = dlqr_reference(A, B, Q, R)
        W = 0.3 * np.eye(2)
        X = sla.solve_discrete_lyapunov(A + B @ K, W)
        E = np.block([[X, X @ K.T], [K @ X, K @ X @ K.T]])
        Theta = np.vstack([A.T, B.T])
        resid = E[:2, :2] - (Theta.T @ E @ Theta + W)
        assert np.linalg.norm(resid) < 1e-10
        assert np.linalg.eigvalsh(E)[0] >= -1e-12

    def test_dual_ordering_against_known_parameter_cost_to_go(self, experiment_system):
        # with the regularizer sized to dominate the uncertainty weight, the
        # dual solution stays below the known-parameter cost-to-go in the PSD
        # order, and richer information (larger V) tightens it toward it
        sigma = experiment_system.sigma_w
        Theta = experiment_system.theta_star()
        _, P_star, _ = riccati_oracle(Theta, experiment_system.Q, experiment_system.R,
                                      sigma, tol=1e-12)
        nu = experiment_system.nu_bound
        alpha0 = experiment_system.alpha0
        W = sigma ** 2 * np.eye(3)
        gaps = []
        r = 0.01
        lam = 4 * nu * (r + (1 + r) * experiment_system.theta_bound) / (alpha0 * sigma ** 2)
        # respect the feasibility relation mu <= lam alpha0 sigma^2 / (4 nu)
        mu = lam * alpha0 * sigma ** 2 / (4 * nu)
        for lam_scale in (1.0, 4.0):
            V = lam_scale * lam * np.eye(6)
            prob = SdpProblem(Theta, experiment_system.Q, experiment_system.R, V, mu, W)
            P = solve_relaxed_dual(prob, tol=1e-10)
            assert np.linalg.eigvalsh(P_star - P)[0] >= -1e-6 * np.linalg.norm(P_star, 2)
            gaps.append(np.linalg.norm(P_star - P, 2))
        assert gaps[1] < gaps[0]


def test_dump_problem_round_trip(tmp_path, rng):
    A, B, Q, R = stable_random_instance(rng)
    prob = SdpProblem(np.vstack([A.T, B.T]), Q, R, np.eye(4), 0.5, np.eye(2))
    text = dump_problem(prob, tmp_path / "instance.txt")
    blocks = {}
    lines = text.strip().split("\n")
    i = 0
    while i < len(lines):
        name, rows, cols = lines[i].split()
        rows, cols = int(rows), int(cols)
        M = np.array([[float(v) for v in lines[i + 1 + r].split()] for r in range(rows)])
        blocks[name] = M.reshape(rows, cols)
        i += rows + 1
    assert np.array_equal(blocks["theta_hat"], prob.theta_hat)
    assert np.array_equal(blocks["V"], prob.V)
    assert blocks["mu"][0, 0] == 0.5
    assert (tmp_path / "instance.txt").read_text() == text
