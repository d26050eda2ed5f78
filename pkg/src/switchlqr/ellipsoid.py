"""Knowledge-transfer geometry between the central mode and sub-modes.

Projecting the central confidence ellipsoid onto a mode's parameter rows is
a Schur complement of the row-permuted shape matrix; lifting a mode input
back to full actuation is zero padding.  The Kronecker structure of the
vectorized quadratic form factors column-wise, so the Schur complement is
taken on the (n+m) x (n+m) shape matrix directly.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .estimation import ConfidenceEllipsoid, EstimationError
from .model import Mode


class ProjectionError(RuntimeError):
    """Removed-block pivot is numerically singular."""


def mode_row_indices(mode: Mode, n: int, m: int) -> list[int]:
    """Rows of the stacked (n+m) x n parameter matrix that a mode retains.

    State rows first, then the rows of the mode's actuators in ascending
    order; this matches the layout of the mode's own regressor (x, u_i).
    """
    return list(range(n)) + [n + c for c in mode.columns()]


def schur_project(V: np.ndarray, keep: list[int]) -> np.ndarray:
    """Shape matrix of the shadow of {v : v'Vv <= r} on the kept coordinates.

    Permutes kept rows first, partitions [[U, M'], [M, T]] and returns
    U - M' T^-1 M.  T is factorized, never inverted.
    """
    V = np.asarray(V, dtype=float)
    dim = V.shape[0]
    removed = [i for i in range(dim) if i not in keep]
    perm = list(keep) + removed
    Vp = V[np.ix_(perm, perm)]
    k = len(keep)
    if not removed:
        return Vp.copy()
    U = Vp[:k, :k]
    Mb = Vp[k:, :k]
    Tb = Vp[k:, k:]
    try:
        c, low = sla.cho_factor(Tb, check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - PD prior precludes this
        raise ProjectionError("removed block is numerically singular") from exc
    S = U - Mb.T @ sla.cho_solve((c, low), Mb, check_finite=False)
    return (S + S.T) / 2


def project_to_mode(central: ConfidenceEllipsoid, mode: Mode) -> ConfidenceEllipsoid:
    """Project the central ellipsoid onto a mode's parameter subspace.

    The center of the shadow is the row subselection of the central center;
    the shape is the Schur complement of the removed actuator rows; the
    radius is unchanged.
    """
    n = central.n
    m = central.dim_d
    if any(c >= m for c in mode.columns()):
        raise EstimationError(f"mode {mode.id} does not fit a central ellipsoid with m={m}")
    keep = mode_row_indices(mode, n, m)
    shape = schur_project(central.shape, keep)
    center = central.center[keep, :]
    return ConfidenceEllipsoid(center=center, shape=shape, radius=central.radius,
                               dim_d=mode.dim)


def augment_input(u_i: np.ndarray, mode: Mode, m: int) -> np.ndarray:
    """Zero-pad a mode input to full actuation length."""
    u_i = np.asarray(u_i, dtype=float)
    if u_i.shape != (mode.dim,):
        raise EstimationError("augment_input: length mismatch")
    u = np.zeros(m)
    u[mode.columns()] = u_i
    return u


def logdet_ratio_check(central_shape: np.ndarray, projected_shape: np.ndarray, m: int,
                       upsilon: float, t: float) -> tuple[float, float, bool]:
    """Runtime diagnostic: log det(V) - log det(V_proj) against its a.s. bound.

    The bound is (m-1) log((1+2Y) t) with Y the extended-state energy
    constant; returns (ratio, bound, ratio <= bound).
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    ratio = float(np.linalg.slogdet(central_shape)[1] - np.linalg.slogdet(projected_shape)[1])
    bound = float((m - 1) * np.log((1.0 + 2.0 * upsilon) * t))
    return ratio, bound, ratio <= bound + 1e-9
