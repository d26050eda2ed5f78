"""Steady-state covariance SDPs for LQR synthesis under parameter uncertainty.

The exact program minimizes cost over stationary joint (x, u) covariances
subject to Sigma_xx = Theta' Sigma Theta + W.  The uncertainty-robust
variant loosens the equality by mu (Sigma . V^-1) I, which keeps the
program linear in Sigma and makes optimistic synthesis convex; its dual in
the cost-to-go matrix P drives the stability and regret analysis.  Any
conic solver over the PSD cone at moderate accuracy satisfies the module;
CLARABEL is used with an SCS fallback.

Problems are solved with the noise covariance normalized to unit trace
scale and the covariance rescaled afterwards: every constraint term is
linear in Sigma, so the solution scales exactly and the solver sees
well-conditioned data even for very small noise levels.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import cvxpy as cp
import numpy as np


class SdpStatusError(RuntimeError):
    """Solver did not return a usable solution."""


class SdpInfeasibleError(SdpStatusError):
    """Relaxed program infeasible; carries mu and cond(V) for diagnosis."""

    def __init__(self, message: str, mu: float | None = None, cond_V: float | None = None):
        super().__init__(message)
        self.mu = mu
        self.cond_V = cond_V


class ExtractionError(RuntimeError):
    """Sigma_xx too close to singular to extract a gain."""


@dataclass(frozen=True)
class SdpProblem:
    """Data of one uncertainty-robust synthesis instance."""

    theta_hat: np.ndarray  # (n + m_i, n)
    Q: np.ndarray
    R_i: np.ndarray
    V: np.ndarray          # (n + m_i, n + m_i) shape matrix, PD
    mu: float
    W: np.ndarray          # noise covariance, usually sigma^2 I

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        n = self.theta_hat.shape[1]
        d = self.theta_hat.shape[0] - n
        if self.Q.shape != (n, n) or self.R_i.shape != (d, d) or self.W.shape != (n, n):
            raise ValueError("inconsistent SDP problem shapes")
        if self.V.shape != (n + d, n + d):
            raise ValueError("V shape mismatch")

    @property
    def n(self) -> int:
        return self.theta_hat.shape[1]

    @property
    def d(self) -> int:
        return self.theta_hat.shape[0] - self.n


@dataclass
class SdpSolution:
    """Primal covariance, objective, constraint residual and dual snapshot."""

    Sigma: np.ndarray
    objective: float
    residual: float
    dual_P: np.ndarray | None
    status: str

    @property
    def Sigma_xx(self) -> np.ndarray:
        n = self.dual_P.shape[0] if self.dual_P is not None else None
        if n is None:
            raise ValueError("solution does not carry block sizes")
        return self.Sigma[:n, :n]


_SOLVE_OPTS = {"CLARABEL": ("tol_gap_abs", "tol_gap_rel", "tol_feas")}


def _solve(prob: cp.Problem, tol: float, max_iter: int) -> str:
    """Run CLARABEL at the requested tolerance, falling back to SCS."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # accuracy is checked via residuals below
        try:
            prob.solve(solver=cp.CLARABEL, max_iter=max_iter,
                       **{k: tol for k in _SOLVE_OPTS["CLARABEL"]})
        except cp.error.SolverError:
            prob.solve(solver=cp.SCS, max_iters=50 * max_iter, eps=max(tol, 1e-9))
    return prob.status


def _solve_covariance_program(theta: np.ndarray, Q: np.ndarray, R_i: np.ndarray,
                              W: np.ndarray, mu: float, V: np.ndarray | None,
                              tol: float, max_iter: int) -> SdpSolution:
    n = theta.shape[1]
    d = theta.shape[0] - n
    scale = float(np.trace(W) / n)
    W_unit = W / scale
    cost = np.block([[Q, np.zeros((n, d))], [np.zeros((d, n)), R_i]])

    Sigma = cp.Variable((n + d, n + d), PSD=True)
    rhs = theta.T @ Sigma @ theta + W_unit
    if mu > 0:
        if V is None:
            raise ValueError("relaxed program requires the shape matrix V")
        V_inv = np.linalg.inv(V)
        V_inv = (V_inv + V_inv.T) / 2
        rhs = rhs - mu * cp.trace(Sigma @ V_inv) * np.eye(n)
    constraint = Sigma[:n, :n] >> rhs
    prob = cp.Problem(cp.Minimize(cp.trace(cost @ Sigma)), [constraint])
    status = _solve(prob, tol, max_iter)

    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        cond_V = float(np.linalg.cond(V)) if V is not None else None
        raise SdpInfeasibleError(f"relaxed SDP infeasible (mu={mu:g})", mu=mu, cond_V=cond_V)
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or Sigma.value is None:
        raise SdpStatusError(f"SDP solve failed with status {status!r}")

    S_unit = np.asarray(Sigma.value)
    S_unit = (S_unit + S_unit.T) / 2
    gap = S_unit[:n, :n] - (theta.T @ S_unit @ theta + W_unit)
    if mu > 0:
        gap = gap + mu * float(np.trace(S_unit @ V_inv)) * np.eye(n)
    if mu > 0:
        violation = max(0.0, -float(np.linalg.eigvalsh((gap + gap.T) / 2)[0]))
    else:
        violation = float(np.linalg.norm(gap))
    P = constraint.dual_value
    if P is not None:
        P = np.asarray(P)
        P = (P + P.T) / 2
    return SdpSolution(Sigma=scale * S_unit, objective=scale * float(prob.value),
                       residual=scale * violation, dual_P=P, status=status)


def solve_exact_sdp(Theta: np.ndarray, Q: np.ndarray, R_i: np.ndarray, W: np.ndarray,
                    tol: float = 1e-10, max_iter: int = 500) -> SdpSolution:
    """Exact steady-state LQR SDP at known parameters.

    The equality constraint is posed as an inequality that binds at the
    optimum (Q > 0 makes slack in Sigma_xx costly); the reported residual is
    the equality gap of the returned solution.
    """
    return _solve_covariance_program(np.asarray(Theta, dtype=float), Q, R_i, W,
                                     mu=0.0, V=None, tol=tol, max_iter=max_iter)


def solve_relaxed_sdp(problem: SdpProblem, tol: float = 1e-10, max_iter: int = 500) -> SdpSolution:
    """Uncertainty-robust covariance program with the mu (Sigma . V^-1) slack."""
    return _solve_covariance_program(problem.theta_hat, problem.Q, problem.R_i, problem.W,
                                     mu=problem.mu, V=problem.V, tol=tol, max_iter=max_iter)


def extract_gain(solution: SdpSolution, n: int | None = None) -> np.ndarray:
    """Linear policy K = Sigma_ux Sigma_xx^-1 from a solved covariance."""
    S = solution.Sigma
    if n is None:
        if solution.dual_P is None:
            raise ExtractionError("block size unknown; pass n explicitly")
        n = solution.dual_P.shape[0]
    Sxx = S[:n, :n]
    evals = np.linalg.eigvalsh(Sxx)
    if evals[0] <= 1e-12 * max(evals[-1], 1e-300):
        raise ExtractionError(
            f"Sigma_xx is singular to working precision (eigs {evals[0]:.3g}..{evals[-1]:.3g})")
    return np.linalg.solve(Sxx, S[:n, n:]).T


def solve_relaxed_dual(problem: SdpProblem, tol: float = 1e-10, max_iter: int = 500,
                       outer_iters: int = 10) -> np.ndarray:
    """Cost-to-go dual of the relaxed program.

    max P . W  s.t.  diag(Q - P, R_i) + theta P theta' >= mu ||P||_* V^-1,
    P >= 0.  The trace-norm coefficient is handled by an outer fixed point
    on s = ||P||_*: solve with s frozen, update s, repeat.  For P >= 0 the
    trace norm equals the trace, so the fixed point settles in very few
    rounds.
    """
    theta = problem.theta_hat
    n, d = problem.n, problem.d
    scale = float(np.trace(problem.W) / n)
    W_unit = problem.W / scale
    V_inv = np.linalg.inv(problem.V)
    V_inv = (V_inv + V_inv.T) / 2

    s = 0.0
    P_val: np.ndarray | None = None
    for _ in range(outer_iters):
        P = cp.Variable((n, n), PSD=True)
        lhs = cp.bmat([[problem.Q - P, np.zeros((n, d))],
                       [np.zeros((d, n)), problem.R_i]]) + theta @ P @ theta.T
        cons = [lhs >> problem.mu * s * V_inv]
        prob = cp.Problem(cp.Maximize(cp.trace(P @ W_unit)), cons)
        status = _solve(prob, tol, max_iter)
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or P.value is None:
            raise SdpStatusError(f"dual solve failed with status {status!r}")
        P_val = np.asarray(P.value)
        P_val = (P_val + P_val.T) / 2
        s_new = float(np.trace(P_val))
        if problem.mu == 0.0 or abs(s_new - s) <= 1e-6 * max(s_new, 1.0):
            s = s_new
            break
        s = s_new
    assert P_val is not None
    return P_val


def dump_problem(problem: SdpProblem, path: str | None = None) -> str:
    """Plain-text dump for external cross-checking.

    Format: one block per matrix, a header line `name rows cols`, then one
    whitespace-separated row per line (row-major); the scalar mu appears as
    a 1x1 block.
    """
    buf = io.StringIO()

    def emit(name: str, M: np.ndarray) -> None:
        M = np.atleast_2d(np.asarray(M, dtype=float))
        buf.write(f"{name} {M.shape[0]} {M.shape[1]}\n")
        for row in M:
            buf.write(" ".join(repr(float(v)) for v in row) + "\n")

    emit("theta_hat", problem.theta_hat)
    emit("Q", problem.Q)
    emit("R", problem.R_i)
    emit("V", problem.V)
    emit("W", problem.W)
    emit("mu", np.array([[problem.mu]]))
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
