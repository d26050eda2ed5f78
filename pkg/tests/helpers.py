"""Independent numerical oracles used across the test suite."""

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize


def scalar_riccati_root(a: float, b: float, q: float, r: float) -> float:
    """Positive root of the one-dimensional Riccati fixed point.

    p = q + a^2 p - (a b p)^2 / (r + b^2 p) rearranges to the quadratic
    b^2 p^2 + (r - q b^2 - a^2 r) p - q r = 0.
    """
    coeffs = [b ** 2, r - q * b ** 2 - a ** 2 * r, -q * r]
    roots = np.roots(coeffs)
    roots = roots[np.isreal(roots)].real
    return float(roots[roots > 0].max())


def dlqr_reference(A: np.ndarray, Bi: np.ndarray, Q: np.ndarray, Ri: np.ndarray):
    """scipy DARE route: independent of both the iteration and the SDP."""
    P = sla.solve_discrete_are(A, Bi, Q, Ri)
    K = -np.linalg.solve(Ri + Bi.T @ P @ Bi, Bi.T @ P @ A)
    return K, P


def _sphere(angles: np.ndarray) -> np.ndarray:
    """Spherical parametrization of a unit vector in dimension len(angles)+1."""
    u = [np.cos(angles[0])]
    s = np.sin(angles[0])
    for a in angles[1:]:
        u.append(s * np.cos(a))
        s = s * np.sin(a)
    u.append(s)
    return np.array(u)


def shadow_support_sampled(V: np.ndarray, r: float, keep: list[int], d: np.ndarray,
                           rng: np.random.Generator, n_samples: int = 4096) -> float:
    """Support function of the projected ellipsoid by boundary sampling.

    Samples boundary points of {v : v'Vv <= r} through the Cholesky-whitened
    sphere, projects onto the kept coordinates, and polishes the maximal
    extent along d with a local optimizer on the sphere angles.  Never forms
    a Schur complement.
    """
    dim = V.shape[0]
    L = np.linalg.cholesky(V)

    def point(u: np.ndarray) -> np.ndarray:
        return np.sqrt(r) * sla.solve_triangular(L, u, trans="T", lower=True)

    def extent(u: np.ndarray) -> float:
        return float(d @ point(u)[keep])

    U = rng.standard_normal((n_samples, dim))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    vals = np.array([extent(u) for u in U])
    u0 = U[int(np.argmax(vals))]

    # refine on spherical angles seeded at the best sample
    ang0 = np.zeros(dim - 1)
    ang0[0] = np.arccos(np.clip(u0[0], -1, 1))
    rest = u0[1:]
    for k in range(1, dim - 1):
        nrm = np.linalg.norm(rest[k - 1:])
        ang0[k] = 0.0 if nrm == 0 else np.arccos(np.clip(rest[k - 1] / nrm, -1, 1))
    res = minimize(lambda ang: -extent(_sphere(ang)), ang0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    return max(float(vals.max()), float(-res.fun))


def ellipsoid_support(shape: np.ndarray, r: float, d: np.ndarray) -> float:
    """Closed-form support sqrt(r d' shape^-1 d) of {w : w' shape w <= r}."""
    c, low = sla.cho_factor(shape)
    return float(np.sqrt(r * d @ sla.cho_solve((c, low), d)))
