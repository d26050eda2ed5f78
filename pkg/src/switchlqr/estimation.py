"""Regularized least squares with self-normalized confidence ellipsoids.

An estimator stream absorbs regressor/next-state pairs (z_s, x_{s+1}) into a
shape matrix V = V_prior + sum z z' and an accumulator sum z x'.  Its center
solves V Theta = accum + V_prior Theta_prior.  Radii come in two flavours:
the warm-up flavour measured against a flat lambda*I prior with a norm bound
on the true parameters, and the inherited flavour measured against an
arbitrary prior ellipsoid (a projection of the central one, or the flat
anchor used by the restart baseline).

All determinant ratios are computed as differences of log-determinants;
plain determinants overflow within a few thousand steps.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla


class EstimationError(ValueError):
    """Estimator misuse (bad prior, dimension mismatch, missing prior)."""


class ConditioningWarning(UserWarning):
    """Shape matrix condition number is large; center solve may lose digits."""


@dataclass(frozen=True)
class ConfidenceEllipsoid:
    """Set {Theta : trace((Theta - center)' shape (Theta - center)) <= radius}."""

    center: np.ndarray  # (n + d, n)
    shape: np.ndarray   # (n + d, n + d), symmetric positive definite
    radius: float
    dim_d: int

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        shape = np.asarray(self.shape, dtype=float)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "shape", shape)
        rows, n = center.shape
        if shape.shape != (rows, rows):
            raise EstimationError("center and shape dimensions disagree")
        if rows != n + self.dim_d:
            raise EstimationError("dim_d inconsistent with center shape")
        if not np.allclose(shape, shape.T, atol=1e-10 * max(1.0, abs(shape).max())):
            raise EstimationError("shape matrix must be symmetric")
        evals = np.linalg.eigvalsh(shape)
        # tolerate eigenvalues at round-off scale relative to the spectrum top
        if evals[0] <= -1e-10 * max(evals[-1], 1e-300):
            raise EstimationError("shape matrix must be positive definite")
        if self.radius <= 0:
            raise EstimationError("radius must be positive")

    @property
    def n(self) -> int:
        return self.center.shape[1]


def contains(ellipsoid: ConfidenceEllipsoid, Theta: np.ndarray, slack: float = 1e-12) -> bool:
    """Membership test with a small absolute+relative slack for round-off."""
    Theta = np.asarray(Theta, dtype=float)
    if Theta.shape != ellipsoid.center.shape:
        raise EstimationError("contains: dimension mismatch")
    D = Theta - ellipsoid.center
    val = float(np.trace(D.T @ ellipsoid.shape @ D))
    return val <= ellipsoid.radius + slack * (1.0 + abs(ellipsoid.radius))


@dataclass
class EstimatorState:
    """One identification stream: running shape matrix, data accumulator, prior."""

    V: np.ndarray
    zx_accum: np.ndarray
    prior_center: np.ndarray
    prior_shape: np.ndarray
    prior_radius: float | None
    lam: float | None
    count: int = 0
    # log det V maintained incrementally; resync via recompute_logdet()
    logdet_V: float = field(default=0.0)
    logdet_prior: float = field(default=0.0)

    @property
    def n(self) -> int:
        return self.zx_accum.shape[1]

    @property
    def dim(self) -> int:
        return self.V.shape[0]

    def recompute_logdet(self) -> None:
        self.logdet_V = float(np.linalg.slogdet(self.V)[1])


def pd_solve(V: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve V X = B for symmetric positive definite V, degrading gracefully
    to a minimum-norm solve when the spectrum spans machine precision."""
    try:
        return np.linalg.solve(V, B)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(V, B, rcond=None)[0]


def pd_quad_form(V: np.ndarray, z: np.ndarray) -> float:
    """z' V^-1 z with the same graceful degradation as pd_solve."""
    return float(z @ pd_solve(V, z))


def init_estimator(prior: ConfidenceEllipsoid | None = None, *, lam: float | None = None,
                   n: int | None = None, d: int | None = None) -> EstimatorState:
    """Create a stream from an inherited ellipsoid or a flat lambda*I prior.

    Flat case (prior=None): requires lam > 0 and sizes n, d; prior center is
    zero.  Inherited case: V starts at the prior shape and the center solve
    reproduces the prior center until data arrives.
    """
    if prior is None:
        if lam is None or lam <= 0:
            raise EstimationError("flat prior requires lam > 0")
        if n is None or d is None:
            raise EstimationError("flat prior requires explicit sizes n and d")
        dim = n + d
        V = lam * np.eye(dim)
        state = EstimatorState(
            V=V, zx_accum=np.zeros((dim, n)),
            prior_center=np.zeros((dim, n)), prior_shape=lam * np.eye(dim),
            prior_radius=None, lam=lam)
    else:
        evals = np.linalg.eigvalsh(prior.shape)
        if evals[0] <= 0:
            raise EstimationError("inherited prior shape must be positive definite")
        dim = prior.shape.shape[0]
        state = EstimatorState(
            V=prior.shape.copy(), zx_accum=np.zeros((dim, prior.n)),
            prior_center=prior.center.copy(), prior_shape=prior.shape.copy(),
            prior_radius=float(prior.radius), lam=lam)
    state.recompute_logdet()
    state.logdet_prior = state.logdet_V
    return state


def absorb_observation(state: EstimatorState, z: np.ndarray, x_next: np.ndarray) -> EstimatorState:
    """Rank-one update V += z z', accum += z x_next'; returns the same state."""
    z = np.asarray(z, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    if z.shape != (state.dim,) or x_next.shape != (state.n,):
        raise EstimationError("absorb_observation: dimension mismatch")
    # det(V + zz') = det(V) (1 + z' V^-1 z); the quad form is clamped at zero
    # since tiny negatives are pure round-off on near-singular spectra
    state.logdet_V += float(np.log1p(max(pd_quad_form(state.V, z), 0.0)))
    state.V += np.outer(z, z)
    state.zx_accum += np.outer(z, x_next)
    state.count += 1
    return state


def center_estimate(state: EstimatorState) -> np.ndarray:
    """Regularized least-squares center V^-1 (accum + V_prior Theta_prior)."""
    rhs = state.zx_accum + state.prior_shape @ state.prior_center
    cond = np.linalg.cond(state.V)
    if cond > 1e14:
        warnings.warn(
            f"shape matrix condition number {cond:.3g} exceeds 1e14", ConditioningWarning,
            stacklevel=2)
    try:
        c, low = sla.cho_factor(state.V, check_finite=False)
        return sla.cho_solve((c, low), rhs, check_finite=False)
    except np.linalg.LinAlgError:
        # spectra spanning more than machine precision: minimum-norm solve
        return np.linalg.lstsq(state.V, rhs, rcond=None)[0]


def _radius_core(sigma_w: float, n: int, delta: float, logdet_ratio: float, tail: float) -> float:
    if not 0 < delta < 1:
        raise EstimationError("delta must lie in (0, 1)")
    arg = np.log(n / delta) + max(logdet_ratio, 0.0)
    return float((sigma_w * np.sqrt(2.0 * n * arg) + tail) ** 2)


def radius_warmup(state: EstimatorState, delta: float, sigma_w: float, theta_bound: float) -> float:
    """Confidence radius for the flat-prior stream with a parameter-norm bound.

    r = (sigma sqrt(2 n log(n det V / (delta det(lam I)))) + sqrt(lam) theta_bound)^2
    """
    if state.lam is None:
        raise EstimationError("radius_warmup requires a flat lambda prior")
    ratio = state.logdet_V - state.dim * np.log(state.lam)
    return _radius_core(sigma_w, state.n, delta, ratio, np.sqrt(state.lam) * theta_bound)


def radius_inherited(state: EstimatorState, delta: float, sigma_w: float) -> float:
    """Confidence radius for a stream seeded by an inherited prior ellipsoid.

    r = (sigma sqrt(2 n log(n det V / (delta det V_prior))) + sqrt(r_prior))^2
    """
    if state.prior_radius is None:
        raise EstimationError("radius_inherited requires a prior ellipsoid")
    ratio = state.logdet_V - state.logdet_prior
    return _radius_core(sigma_w, state.n, delta, ratio, np.sqrt(state.prior_radius))


def current_ellipsoid(state: EstimatorState, radius: float) -> ConfidenceEllipsoid:
    """Snapshot the stream as a confidence ellipsoid with the given radius."""
    return ConfidenceEllipsoid(
        center=center_estimate(state), shape=state.V.copy(), radius=radius,
        dim_d=state.dim - state.n)


def snapshot_ellipsoid(state: EstimatorState, delta: float, sigma_w: float) -> ConfidenceEllipsoid:
    """Current knowledge of a prior-seeded stream.

    With zero absorbed observations this reproduces the prior ellipsoid
    exactly; once data arrives the radius follows the inherited formula.
    """
    if state.count == 0 and state.prior_radius is not None:
        return current_ellipsoid(state, state.prior_radius)
    return current_ellipsoid(state, radius_inherited(state, delta, sigma_w))


def upsilon_bar(kappa_star: float, chi: float, sigma_w: float, n: int, T, delta: float):
    """Extended-state energy constant 3200 kappa*^6 sigma^2 n log(T/delta) / chi^2.

    T may be an array, in which case the value is evaluated pointwise.
    """
    if not 0 < chi <= 1:
        raise EstimationError("chi must lie in (0, 1]")
    if np.any(np.asarray(T) < 1):
        raise EstimationError("T must be at least 1")
    out = 3200.0 * kappa_star ** 6 * sigma_w ** 2 * n * np.log(T / delta) / chi ** 2
    return float(out) if np.ndim(out) == 0 else out


def rbar_upper_bound(n: int, m: int, delta: float, sigma_w: float, upsilon,
                     T, epsilon: float, lam: float):
    """Horizon-wide upper bound on any stream's confidence radius.

    8 sigma^2 n (2 log(n/delta) + (1+2Y) log T + (m-1) log((1+2Y) T)) + 2 eps lam
    with Y the extended-state energy constant; T (and Y) may be arrays.
    """
    if not 0 < delta < 1:
        raise EstimationError("delta must lie in (0, 1)")
    growth = (1.0 + 2.0 * upsilon) * np.log(T) + (m - 1) * np.log((1.0 + 2.0 * upsilon) * T)
    out = 8.0 * sigma_w ** 2 * n * (2.0 * np.log(n / delta) + growth) + 2.0 * epsilon * lam
    return float(out) if np.ndim(out) == 0 else out
