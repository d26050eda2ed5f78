"""True plant model: switched actuation of a discrete-time LQR system.

The plant is x_{t+1} = A x_t + B^i u^i_t + w_{t+1}, where B^i keeps a subset
of the columns of B (an "actuating mode").  Stage cost is x'Qx + u'R^i u with
R^i the matching principal submatrix of R.  This module also provides the
Riccati fixed-point oracle used to validate the SDP solver and to compute the
per-mode optimal average cost that regret is measured against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ModelError(ValueError):
    """Invalid plant or mode specification."""


class RiccatiDivergenceError(RuntimeError):
    """Riccati iteration failed to converge (unstabilizable pair or bad tol)."""


@dataclass(frozen=True)
class Mode:
    """A subset of actuators, identified by 1-based column indices into B."""

    id: int
    actuators: tuple[int, ...]

    def __post_init__(self):
        acts = tuple(sorted(set(self.actuators)))
        if not acts:
            raise ModelError(f"mode {self.id}: empty actuator set")
        if any(a < 1 for a in acts):
            raise ModelError(f"mode {self.id}: actuator indices are 1-based")
        object.__setattr__(self, "actuators", acts)

    @property
    def dim(self) -> int:
        return len(self.actuators)

    def columns(self) -> list[int]:
        """0-based column indices into B."""
        return [a - 1 for a in self.actuators]


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean process noise with per-component std sigma_w.

    kind 'gaussian' is the default; 'uniform' (bounded, same variance) is a
    second sub-Gaussian law kept around for robustness experiments.
    """

    sigma_w: float
    kind: str = "gaussian"
    seed: int | None = None

    def __post_init__(self):
        if self.sigma_w <= 0:
            raise ModelError("sigma_w must be positive")
        if self.kind not in ("gaussian", "uniform"):
            raise ModelError(f"unknown noise kind {self.kind!r}")

    def draw(self, steps: int, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        """Draw a (steps, n) noise sample path."""
        if rng is None:
            rng = np.random.default_rng(self.seed)
        if self.kind == "gaussian":
            return self.sigma_w * rng.standard_normal((steps, n))
        # uniform on [-sqrt(3) s, sqrt(3) s] has variance s^2
        half = np.sqrt(3.0) * self.sigma_w
        return rng.uniform(-half, half, size=(steps, n))


def _controllable(A: np.ndarray, Bi: np.ndarray) -> bool:
    n = A.shape[0]
    blocks = [Bi]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    ctrb = np.hstack(blocks)
    s = np.linalg.svd(ctrb, compute_uv=False)
    return bool(np.sum(s > 1e-9 * s[0]) == n)


@dataclass(frozen=True)
class LinearSwitchedSystem:
    """True plant matrices plus the catalog of actuating modes.

    The first mode in `modes` must contain all m actuators (the central mode).
    theta_bound bounds the operator norm of the stacked parameter matrix
    (A, B)^T; nu_bound bounds the per-mode optimal average cost; alpha0 is a
    lower eigenvalue bound on Q (and on the R blocks for the stability
    constants).
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    sigma_w: float
    theta_bound: float
    nu_bound: float
    alpha0: float
    modes: tuple[Mode, ...] = field(default=())

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        Q = np.asarray(self.Q, dtype=float)
        R = np.asarray(self.R, dtype=float)
        for name, M in (("A", A), ("B", B), ("Q", Q), ("R", R)):
            object.__setattr__(self, name, M)
            M.setflags(write=False)
        n, m = self.n, self.m
        if A.shape != (n, n) or B.shape != (n, m) or Q.shape != (n, n) or R.shape != (m, m):
            raise ModelError("inconsistent matrix shapes")
        if not np.allclose(Q, Q.T) or not np.allclose(R, R.T):
            raise ModelError("Q and R must be symmetric")
        eq = np.linalg.eigvalsh(Q)
        er = np.linalg.eigvalsh(R)
        if eq[0] <= 0:
            raise ModelError("Q must be positive definite")
        if eq[0] < self.alpha0 - 1e-12:
            raise ModelError(f"alpha0={self.alpha0} exceeds the smallest eigenvalue of Q ({eq[0]:.6g})")
        if er[0] < -1e-12:
            raise ModelError("R must be positive semidefinite")
        if self.sigma_w <= 0:
            raise ModelError("sigma_w must be positive")
        if self.alpha0 <= 0:
            raise ModelError("alpha0 must be positive")
        if not self.modes:
            object.__setattr__(self, "modes", (Mode(1, tuple(range(1, m + 1))),))
        modes = tuple(self.modes)
        object.__setattr__(self, "modes", modes)
        if modes[0].dim != m:
            raise ModelError("the first mode must contain all actuators")
        for mode in modes:
            if any(a > m for a in mode.actuators):
                raise ModelError(f"mode {mode.id}: actuator index out of range 1..{m}")
            if not _controllable(A, B[:, mode.columns()]):
                raise ModelError(f"mode {mode.id}: (A, B^i) is not controllable")
        tb = np.linalg.norm(self.theta_star(), 2)
        if tb > self.theta_bound:
            raise ModelError(f"theta_bound={self.theta_bound} is below ||(A,B)'|| = {tb:.6g}")

    @property
    def n(self) -> int:
        return np.asarray(self.A).shape[0]

    @property
    def m(self) -> int:
        return np.asarray(self.B).shape[1]

    def theta_star(self, mode: Mode | None = None) -> np.ndarray:
        """Stacked true parameters (A, B^i)^T of shape (n + m_i, n)."""
        if mode is None:
            return np.vstack([self.A.T, self.B.T])
        Bi, _ = mode_submatrices(self, mode)
        return np.vstack([self.A.T, Bi.T])

    def mode_by_id(self, mode_id: int) -> Mode:
        for mode in self.modes:
            if mode.id == mode_id:
                return mode
        raise ModelError(f"unknown mode id {mode_id}")


def mode_submatrices(sys: LinearSwitchedSystem, mode: Mode) -> tuple[np.ndarray, np.ndarray]:
    """Column selection B^i of B and principal submatrix R^i of R for a mode."""
    cols = mode.columns()
    if any(c >= sys.m for c in cols):
        raise ModelError(f"mode {mode.id}: actuator index out of range")
    Bi = sys.B[:, cols]
    Ri = sys.R[np.ix_(cols, cols)]
    return Bi, Ri


def step(sys: LinearSwitchedSystem, x: np.ndarray, u_i: np.ndarray, mode: Mode,
         w: np.ndarray) -> np.ndarray:
    """One-step dynamics A x + B^i u^i + w."""
    x = np.asarray(x, dtype=float)
    u_i = np.asarray(u_i, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != (sys.n,) or w.shape != (sys.n,) or u_i.shape != (mode.dim,):
        raise ModelError("step: dimension mismatch")
    Bi, _ = mode_submatrices(sys, mode)
    return sys.A @ x + Bi @ u_i + w


def stage_cost(sys: LinearSwitchedSystem, x: np.ndarray, u_i: np.ndarray, mode: Mode) -> float:
    """Quadratic stage cost x'Qx + u'R^i u."""
    x = np.asarray(x, dtype=float)
    u_i = np.asarray(u_i, dtype=float)
    if x.shape != (sys.n,) or u_i.shape != (mode.dim,):
        raise ModelError("stage_cost: dimension mismatch")
    _, Ri = mode_submatrices(sys, mode)
    return float(x @ sys.Q @ x + u_i @ Ri @ u_i)


def riccati_oracle(Theta: np.ndarray, Q: np.ndarray, R_i: np.ndarray, sigma_w: float,
                   tol: float = 1e-10, max_iter: int = 200000
                   ) -> tuple[np.ndarray, np.ndarray, float]:
    """Fixed-point solution of the discrete Riccati equation.

    Theta stacks (A, B_i)^T so A = Theta[:n].T and B_i = Theta[n:].T.  The
    iteration starts from P = Q and stops once the successive-iterate gap is
    below tol relative to (1 + ||P||).  Returns (K, P, J) with u = K x, the
    cost-to-go matrix P, and the optimal average cost J = sigma_w^2 trace(P).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    Theta = np.asarray(Theta, dtype=float)
    n = Theta.shape[1]
    A = Theta[:n, :].T
    Bi = Theta[n:, :].T
    Q = np.asarray(Q, dtype=float)
    R_i = np.asarray(R_i, dtype=float)
    P = Q.copy()
    for _ in range(max_iter):
        G = R_i + Bi.T @ P @ Bi
        K = -np.linalg.solve(G, Bi.T @ P @ A)
        Acl = A + Bi @ K
        P_next = Q + K.T @ R_i @ K + Acl.T @ P @ Acl
        P_next = (P_next + P_next.T) / 2
        if not np.isfinite(P_next).all() or np.abs(P_next).max() > 1e100:
            raise RiccatiDivergenceError(
                "Riccati iterates diverged (unstabilizable pair?)")
        if np.linalg.norm(P_next - P) <= tol * (1.0 + np.linalg.norm(P_next)):
            J = float(sigma_w ** 2 * np.trace(P_next))
            return K, P_next, J
        P = P_next
    raise RiccatiDivergenceError(
        f"Riccati iteration did not converge in {max_iter} iterations (tol={tol:g})")


def optimal_avg_cost(sys: LinearSwitchedSystem, mode: Mode, tol: float = 1e-10) -> float:
    """Optimal average expected cost J*_i of actuating in one mode."""
    _, Ri = mode_submatrices(sys, mode)
    _, _, J = riccati_oracle(sys.theta_star(mode), sys.Q, Ri, sys.sigma_w, tol=tol)
    return J
