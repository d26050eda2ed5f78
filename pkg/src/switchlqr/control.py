"""Warm-up exploration and the switching adaptive controller.

The warm-up phase plays a known stabilizing gain plus exploratory noise and
builds a flat-prior confidence ellipsoid.  The switching controller then
runs epoch by epoch: at each actuator switch it projects the central
ellipsoid onto the new mode, seeds the mode's estimator with the projected
prior, and inside the epoch re-solves the uncertainty-robust SDP whenever
the estimator's determinant doubles (and at the epoch start).  Mode inputs
are zero-padded back to full actuation so the central estimator keeps
absorbing every step regardless of the active mode.

Average-dwell-time machinery guards against destabilizing switch schedules;
switch times themselves are external inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import estimation as est
from .ellipsoid import augment_input, logdet_ratio_check, mode_row_indices, project_to_mode
from .estimation import ConfidenceEllipsoid, EstimatorState
from .model import LinearSwitchedSystem, Mode, mode_submatrices
from .sdp import (ExtractionError, SdpInfeasibleError, SdpProblem, SdpStatusError,
                  extract_gain, solve_exact_sdp, solve_relaxed_sdp)
from .trajectory import PolicyRecord, TrajectoryLog, allocate_log


class ControlError(ValueError):
    """Invalid controller configuration."""


class ScheduleError(ControlError):
    """Switch schedule violates its invariants (ordering, dwell time)."""


class InstabilityAbort(RuntimeError):
    """State norm exceeded the abort threshold; signals a bad gain."""

    def __init__(self, t: int, norm: float):
        super().__init__(f"state norm {norm:.3g} exceeded limit at step {t}")
        self.t = t
        self.norm = norm


@dataclass(frozen=True)
class WarmupConfig:
    """Initial stabilizing gain and the constants sizing the warm-up phase."""

    K0: np.ndarray
    kappa0: float
    gamma0: float
    C0: float = 1.0
    eps0: float = 1.0
    T0: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "K0", np.asarray(self.K0, dtype=float))
        if not (0 < self.gamma0 < 1):
            raise ControlError("gamma0 must lie in (0, 1)")
        if self.kappa0 < 1:
            raise ControlError("kappa0 must be at least 1")


@dataclass(frozen=True)
class SwitchSchedule:
    """Switch times with either explicit mode ids or 'auto' selection."""

    times: tuple[int, ...]
    mode_ids: tuple[int, ...] | str = "auto"

    def __post_init__(self):
        times = tuple(int(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if not times or times[0] != 0:
            raise ScheduleError("schedule must start at time 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ScheduleError("switch times must be strictly increasing")
        if self.mode_ids != "auto":
            ids = tuple(int(i) for i in self.mode_ids)
            object.__setattr__(self, "mode_ids", ids)
            if len(ids) != len(times):
                raise ScheduleError("one mode id per switch time is required")

    @property
    def auto(self) -> bool:
        return self.mode_ids == "auto"

    def min_gap(self, horizon: int | None = None) -> int:
        gaps = [b - a for a, b in zip(self.times, self.times[1:])]
        if horizon is not None:
            gaps.append(horizon - self.times[-1])
        return min(gaps) if gaps else (horizon or 0)


@dataclass(frozen=True)
class MadtParams:
    """Dwell-time constants; tau_mad is derived from (kappa*, gamma*, chi)."""

    kappa_star: float
    gamma_star: float
    chi: float
    tau_mad: int = field(init=False)

    def __post_init__(self):
        if not (0 < self.chi < self.gamma_star / 2 < 1):
            raise ControlError("need 0 < chi < gamma_star/2 < 1")
        object.__setattr__(self, "tau_mad",
                           compute_madt(self.kappa_star, self.gamma_star, self.chi))


@dataclass
class RunParams:
    """Knobs of one adaptive run (shared by the projection and restart strategies)."""

    T: int
    delta: float
    lambda_reg: float
    epsilon: float
    mu_scale: float = 1.0
    sdp_tol: float = 1e-9
    sdp_max_iter: int = 500
    instability_limit: float = 1e6
    x0: np.ndarray | None = None
    madt: MadtParams | None = None
    enforce_madt: bool = False
    auto_mode_override: tuple[int, ...] | None = None  # replay of realized 'auto' choices
    madt_upsilon: float | None = None  # extended-state energy level for diagnostics


def stability_params(nu_i: float, alpha0: float, sigma_w: float) -> tuple[float, float]:
    """Strong-stability constants kappa = sqrt(2 nu / (alpha0 sigma^2)), gamma = 1/(2 kappa^2)."""
    if nu_i <= 0 or alpha0 <= 0 or sigma_w <= 0:
        raise ControlError("stability_params requires positive inputs")
    kappa = math.sqrt(2.0 * nu_i / (alpha0 * sigma_w ** 2))
    if kappa ** 2 <= 0.5:
        raise ControlError("kappa^2 <= 1/2: contraction factor would leave (0, 1)")
    return kappa, 1.0 / (2.0 * kappa ** 2)


def compute_madt(kappa_star: float, gamma_star: float, chi: float) -> int:
    """Minimum average dwell time Ceil[ln kappa* / (ln(1-chi) - ln(1-gamma*))]."""
    if not (0 < chi < gamma_star / 2 < 1):
        raise ControlError("need 0 < chi < gamma_star/2 < 1")
    if kappa_star <= 1:
        return 1
    denom = math.log(1.0 - chi) - math.log(1.0 - gamma_star)
    return max(1, math.ceil(math.log(kappa_star) / denom))


def compute_mu(r: float, theta_bound: float, V: np.ndarray, scale: float = 1.0) -> float:
    """Uncertainty weight r + (1+r) theta_bound ||V||^(1/2), times an optional scale."""
    if r < 0:
        raise ControlError("radius must be nonnegative")
    op_norm = float(np.linalg.eigvalsh(V)[-1])
    return scale * (r + (1.0 + r) * theta_bound * math.sqrt(op_norm))


def select_next_mode(central: ConfidenceEllipsoid, candidates: list[Mode] | tuple[Mode, ...]) -> Mode:
    """Candidate whose projected shape matrix has the largest determinant.

    Ties break toward the smallest mode id, which makes 'auto' scheduling
    deterministic.
    """
    if not candidates:
        raise ControlError("select_next_mode requires at least one candidate")
    best: tuple[float, int] | None = None
    best_mode = candidates[0]
    for mode in candidates:
        proj = project_to_mode(central, mode)
        ld = float(np.linalg.slogdet(proj.shape)[1])
        key = (-ld, mode.id)
        if best is None or key < best:
            best = key
            best_mode = mode
    return best_mode


def state_norm_bound(kappa: float, gamma: float, x0_norm: float, t_rel: int,
                     sigma_w: float, n: int, delta: float) -> float:
    """Within-epoch high-probability state bound for a strongly stabilizing policy."""
    t_rel = max(int(t_rel), 1)
    decay = kappa * math.exp(-gamma * (t_rel - 1) / 2.0) * x0_norm
    noise = (20.0 * kappa / gamma) * sigma_w * math.sqrt(n * math.log(t_rel / delta))
    return decay + noise


def switched_state_norm_bound(kappa_star: float, gamma_star: float, chi: float,
                              x0_norm: float, t: int, sigma_w: float, n: int, T: int,
                              delta: float) -> float:
    """Dwell-time-respecting state bound e^(-chi t)||x0|| + U_Omega."""
    u_omega = (20.0 * kappa_star / (chi * gamma_star)) * sigma_w * math.sqrt(n * math.log(T / delta))
    return math.exp(-chi * t) * x0_norm + u_omega


def warmup_duration(cfg: WarmupConfig, n: int, m: int, delta: float, sigma_w: float,
                    lam: float, theta_bound: float, alpha0: float,
                    t_max: int = 10 ** 9) -> int:
    """Smallest duration whose estimation-error bound clears the stabilizing margin.

    The left side decreases like log(T)/T once past its hump, so a doubling
    search brackets the first satisfying duration and a bisection pins it;
    the result is verified to fail at T0 - 1.
    """
    rhs = min(cfg.kappa0 ** 2 * alpha0 * sigma_w ** 2 / cfg.C0, cfg.eps0 ** 2)
    if rhs <= 0:
        raise ControlError("warm-up margin is nonpositive; check C0/eps0")

    def lhs(T0: int) -> float:
        inner = 1.0 + (300.0 * sigma_w ** 2 * cfg.kappa0 ** 4 / cfg.gamma0 ** 2) \
            * (n + theta_bound ** 2 * cfg.kappa0 ** 2) * math.log(T0 / delta)
        root = sigma_w * math.sqrt(2.0 * n * (math.log(n / delta) + math.log(inner)))
        return (80.0 / (T0 * sigma_w ** 2)) * (root + math.sqrt(lam) * theta_bound) ** 2

    if lhs(1) <= rhs:
        return 1
    hi = 1
    while lhs(hi) > rhs:
        hi *= 2
        if hi > t_max:
            raise ControlError(f"no warm-up duration up to {t_max} meets the margin")
    lo = hi // 2  # lhs(lo) > rhs, lhs(hi) <= rhs
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if lhs(mid) <= rhs:
            hi = mid
        else:
            lo = mid
    assert lhs(hi) <= rhs < lhs(hi - 1) or hi == 1
    return hi


def run_warmup(sys: LinearSwitchedSystem, cfg: WarmupConfig, delta: float,
               rng: np.random.Generator, T0: int | None = None,
               x0: np.ndarray | None = None,
               instability_limit: float = 1e6) -> tuple[ConfidenceEllipsoid, TrajectoryLog]:
    """Play u = K0 x + eta on the full mode and build the flat-prior ellipsoid.

    eta is Gaussian with covariance 2 sigma_w^2 kappa0^2 I; the stream is
    regularized with lambda = sigma_w^2 / theta_bound^2 and its radius uses
    the parameter-norm form.
    """
    n, m = sys.n, sys.m
    mode = sys.modes[0]
    if cfg.K0.shape != (m, n):
        raise ControlError("K0 must be m x n")
    if T0 is None:
        T0 = cfg.T0
    if T0 is None:
        raise ControlError("run_warmup needs an explicit or configured duration T0")
    lam = sys.sigma_w ** 2 / sys.theta_bound ** 2
    stream = est.init_estimator(lam=lam, n=n, d=m)
    theta_star = sys.theta_star()
    _, Ri = mode_submatrices(sys, mode)

    log = allocate_log(sys, "warmup", T0)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    log.x[0] = x
    eta_std = math.sqrt(2.0) * sys.sigma_w * cfg.kappa0
    log.gains.append(PolicyRecord(0, 0, 0, mode.id, cfg.K0.copy(), None, float("nan"),
                                  0.0, 0.0, float("nan"), "warmup"))
    for t in range(T0):
        D = theta_star - est.center_estimate(stream)
        log.trace_residual[t] = float(np.trace(D.T @ stream.V @ D))
        log.radius_monitor[t] = est.radius_warmup(stream, delta, sys.sigma_w, sys.theta_bound)

        eta = eta_std * rng.standard_normal(m)
        w = sys.sigma_w * rng.standard_normal(n)
        u = cfg.K0 @ x + eta
        z = np.concatenate([x, u])
        x_next = sys.A @ x + sys.B @ u + w
        log.u_full[t] = u
        log.w[t] = w
        log.cost[t] = float(x @ sys.Q @ x + u @ Ri @ u)
        log.mode_id[t] = mode.id
        log.z_norm_sq[t] = float(z @ z)
        log.z_quad[t] = est.pd_quad_form(stream.V, z)
        if t == 0:
            log.policy_update[t] = True
            log.sdp_status[t] = "warmup"
        est.absorb_observation(stream, z, x_next)
        log.logdet_v[t] = stream.logdet_V
        log.radius_epoch[t] = est.radius_warmup(stream, delta, sys.sigma_w, sys.theta_bound)
        x = x_next
        log.x[t + 1] = x
        if np.linalg.norm(x) > instability_limit:
            raise InstabilityAbort(t, float(np.linalg.norm(x)))
    radius = est.radius_warmup(stream, delta, sys.sigma_w, sys.theta_bound)
    ellipsoid = est.current_ellipsoid(stream, radius)
    log.metadata.update({"T0": T0, "lambda_warmup": lam, "radius": radius})
    return ellipsoid, log


def _epoch_bounds(schedule: SwitchSchedule, T: int) -> list[tuple[int, int]]:
    times = list(schedule.times) + [T]
    if schedule.times[-1] >= T:
        raise ScheduleError("last switch time must precede the horizon")
    return [(times[k], times[k + 1]) for k in range(len(schedule.times))]


def _check_madt(schedule: SwitchSchedule, params: RunParams) -> None:
    if params.enforce_madt:
        if params.madt is None:
            raise ScheduleError("MADT enforcement requires MadtParams")
        gap = schedule.min_gap()
        if len(schedule.times) > 1 and gap < params.madt.tau_mad:
            raise ScheduleError(
                f"schedule gap {gap} is below the minimum average dwell time {params.madt.tau_mad}")


def _run_adaptive(sys: LinearSwitchedSystem, schedule: SwitchSchedule, params: RunParams,
                  theta0: np.ndarray, central_prior: ConfidenceEllipsoid | None,
                  strategy: str, noise: np.ndarray) -> TrajectoryLog:
    """Shared epoch engine for the projection strategy and the restart baseline."""
    n, m = sys.n, sys.m
    T = params.T
    _check_madt(schedule, params)
    theta_star = sys.theta_star()
    log = allocate_log(sys, strategy, T)
    x = np.zeros(n) if params.x0 is None else np.asarray(params.x0, dtype=float).copy()
    log.x[0] = x

    central: EstimatorState | None = None
    if strategy == "lcsa":
        assert central_prior is not None
        central = est.init_estimator(prior=central_prior)
    log2 = math.log(2.0)

    for epoch_idx, (t0, t1) in enumerate(_epoch_bounds(schedule, T)):
        # resolve the epoch's mode
        if not schedule.auto:
            mode = sys.mode_by_id(schedule.mode_ids[epoch_idx])
        elif params.auto_mode_override is not None:
            mode = sys.mode_by_id(params.auto_mode_override[epoch_idx])
        else:
            snapshot = _central_snapshot(sys, params, central, central_prior, theta0)
            mode = select_next_mode(snapshot, list(sys.modes))
        Bi, Ri = mode_submatrices(sys, mode)
        keep = mode_row_indices(mode, n, m)
        theta_star_i = theta_star[keep, :]
        W = sys.sigma_w ** 2 * np.eye(n)

        # seed the epoch estimator
        if strategy == "lcsa":
            snapshot = _central_snapshot(sys, params, central, central_prior, theta0)
            prior = project_to_mode(snapshot, mode)
            ratio, bound, ok = logdet_ratio_check(
                snapshot.shape, prior.shape, m,
                upsilon=params.madt_upsilon if params.madt_upsilon is not None else 0.0,
                t=max(t0, 1))
            log.metadata.setdefault("projection_checks", []).append(
                {"epoch": epoch_idx, "t": t0, "mode_id": mode.id, "logdet_ratio": ratio,
                 "bound": bound, "ok": bool(ok)})
        else:
            prior = ConfidenceEllipsoid(
                center=theta0[keep, :], shape=params.lambda_reg * np.eye(n + mode.dim),
                radius=params.lambda_reg * params.epsilon ** 2, dim_d=mode.dim)
        stream = est.init_estimator(prior=prior, lam=params.lambda_reg)

        K: np.ndarray | None = None
        last_update_logdet = stream.logdet_V
        for t in range(t0, t1):
            update = K is None or stream.logdet_V > last_update_logdet + log2 - 1e-12
            status = ""
            if update:
                theta_hat = est.center_estimate(stream)
                r_now = est.radius_inherited(stream, params.delta, sys.sigma_w)
                mu_formula = compute_mu(r_now, sys.theta_bound, stream.V)
                mu_used = params.mu_scale * mu_formula
                problem = SdpProblem(theta_hat=theta_hat, Q=sys.Q, R_i=Ri, V=stream.V.copy(),
                                     mu=mu_used, W=W)
                try:
                    sol = solve_relaxed_sdp(problem, tol=params.sdp_tol,
                                            max_iter=params.sdp_max_iter)
                    K_new = extract_gain(sol, n)
                    status = "optimal"
                except (SdpInfeasibleError, SdpStatusError, ExtractionError):
                    if K is not None:
                        status = "fallback_prev"
                        sol = None
                        K_new = K
                    else:
                        sol = solve_exact_sdp(theta_hat, sys.Q, Ri, W, tol=params.sdp_tol,
                                              max_iter=params.sdp_max_iter)
                        K_new = extract_gain(sol, n)
                        status = "fallback_exact"
                if sol is not None:
                    K = K_new
                    log.gains.append(PolicyRecord(
                        gain_id=len(log.gains), t=t, epoch=epoch_idx, mode_id=mode.id,
                        K=K.copy(), P=sol.dual_P, objective=sol.objective,
                        mu_used=mu_used, mu_formula=mu_formula, radius=r_now, status=status))
                last_update_logdet = stream.logdet_V

            # good-event bookkeeping with the information available at t
            if strategy == "lcsa":
                assert central is not None
                D = theta_star - est.center_estimate(central)
                log.trace_residual[t] = float(np.trace(D.T @ central.V @ D))
                log.radius_monitor[t] = est.radius_inherited(central, params.delta, sys.sigma_w)
            else:
                D = theta_star_i - est.center_estimate(stream)
                log.trace_residual[t] = float(np.trace(D.T @ stream.V @ D))
                log.radius_monitor[t] = est.radius_inherited(stream, params.delta, sys.sigma_w)

            u = K @ x
            z = np.concatenate([x, u])
            w = noise[t]
            x_next = sys.A @ x + Bi @ u + w

            log.u_full[t] = augment_input(u, mode, m)
            log.w[t] = w
            log.cost[t] = float(x @ sys.Q @ x + u @ Ri @ u)
            log.mode_id[t] = mode.id
            log.epoch[t] = epoch_idx
            log.gain_id[t] = len(log.gains) - 1
            log.policy_update[t] = update
            log.sdp_status[t] = status
            log.z_norm_sq[t] = float(z @ z)
            log.z_quad[t] = est.pd_quad_form(stream.V, z)

            est.absorb_observation(stream, z, x_next)
            if strategy == "lcsa":
                z_full = np.concatenate([x, log.u_full[t]])
                est.absorb_observation(central, z_full, x_next)
            log.logdet_v[t] = stream.logdet_V
            log.radius_epoch[t] = est.radius_inherited(stream, params.delta, sys.sigma_w)
            log.mu_formula[t] = compute_mu(log.radius_epoch[t], sys.theta_bound, stream.V)
            log.mu[t] = params.mu_scale * log.mu_formula[t]

            x = x_next
            log.x[t + 1] = x
            if np.linalg.norm(x) > params.instability_limit:
                raise InstabilityAbort(t, float(np.linalg.norm(x)))

    log.metadata.update({
        "strategy": strategy, "lambda": params.lambda_reg, "mu_scale": params.mu_scale,
        "delta": params.delta, "epsilon": params.epsilon,
        "tau_mad": params.madt.tau_mad if params.madt else None,
    })
    log.validate()
    return log


def _central_snapshot(sys: LinearSwitchedSystem, params: RunParams,
                      central: EstimatorState | None,
                      central_prior: ConfidenceEllipsoid | None,
                      theta0: np.ndarray) -> ConfidenceEllipsoid:
    if central is not None:
        return est.snapshot_ellipsoid(central, params.delta, sys.sigma_w)
    # restart baseline: knowledge is the flat anchor only
    return ConfidenceEllipsoid(center=theta0, shape=params.lambda_reg * np.eye(sys.n + sys.m),
                               radius=params.lambda_reg * params.epsilon ** 2, dim_d=sys.m)


def run_lcsa(sys: LinearSwitchedSystem, schedule: SwitchSchedule,
             central: ConfidenceEllipsoid, params: RunParams,
             rng: np.random.Generator | None = None,
             noise: np.ndarray | None = None) -> TrajectoryLog:
    """Run the projection-based switching controller.

    `central` is the initial central ellipsoid (anchor center, shape and
    radius); it seeds the all-time central estimator that is updated through
    zero-padded inputs and projected onto each epoch's mode at switches.
    Noise may be supplied explicitly (one row per step, shared with a paired
    baseline run) or drawn from rng.
    """
    if noise is None:
        if rng is None:
            raise ControlError("run_lcsa needs either a noise array or an rng")
        noise = sys.sigma_w * rng.standard_normal((params.T, sys.n))
    if noise.shape[0] < params.T:
        raise ControlError("noise array shorter than the horizon")
    return _run_adaptive(sys, schedule, params, theta0=central.center.copy(),
                         central_prior=central, strategy="lcsa", noise=noise)
