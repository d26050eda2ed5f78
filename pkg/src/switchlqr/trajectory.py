"""Run records shared by the controllers, the regret accounting and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .model import LinearSwitchedSystem


@dataclass
class PolicyRecord:
    """One accepted policy: gain, dual snapshot and the solve diagnostics."""

    gain_id: int
    t: int
    epoch: int
    mode_id: int
    K: np.ndarray
    P: np.ndarray | None
    objective: float
    mu_used: float
    mu_formula: float
    radius: float
    status: str


@dataclass
class TrajectoryLog:
    """Per-step record of one closed-loop run plus policy-level snapshots.

    Step arrays cover t = 0..T-1; `x` has one extra row holding the final
    state.  `u_full` stores the zero-padded input so a mode's own input is
    recovered by selecting its actuator columns.  `w` is the injected noise
    (w[t] enters the transition from t to t+1); simulation-only, used to
    verify noise reconstruction.  Good-event bookkeeping logs, per step, the
    weighted parameter residual of the monitored estimator stream, the
    matching confidence radius and ||z||^2.
    """

    system: LinearSwitchedSystem
    strategy: str
    T: int
    x: np.ndarray            # (T+1, n)
    u_full: np.ndarray       # (T, m)
    w: np.ndarray            # (T, n)
    cost: np.ndarray         # (T,)
    mode_id: np.ndarray      # (T,) int
    epoch: np.ndarray        # (T,) int
    gain_id: np.ndarray      # (T,) int
    policy_update: np.ndarray  # (T,) bool
    logdet_v: np.ndarray     # (T,) epoch-stream log det after absorbing step t
    mu: np.ndarray           # (T,) mu in use (scaled)
    mu_formula: np.ndarray   # (T,) unscaled uncertainty weight r + (1+r) theta ||V||^0.5
    z_quad: np.ndarray       # (T,) z' V^-1 z with the pre-update covariance
    radius_epoch: np.ndarray   # (T,)
    trace_residual: np.ndarray  # (T,) monitored-stream weighted residual
    radius_monitor: np.ndarray  # (T,) radius matching trace_residual
    z_norm_sq: np.ndarray    # (T,)
    sdp_status: list[str]
    gains: list[PolicyRecord]
    metadata: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        T = self.T
        assert self.x.shape[0] == T + 1
        for arr in (self.u_full, self.w, self.cost, self.mode_id, self.epoch, self.gain_id,
                    self.policy_update, self.logdet_v, self.mu, self.z_quad):
            assert arr.shape[0] == T
        assert len(self.sdp_status) == T
        assert np.all(np.diff(self.epoch) >= 0), "epoch indices must be non-decreasing"
        for t in np.flatnonzero(self.policy_update):
            assert self.sdp_status[t], "policy update without an SDP status entry"

    def u_mode(self, t: int) -> np.ndarray:
        """Input in the coordinates of the mode active at step t."""
        mode = self.system.mode_by_id(int(self.mode_id[t]))
        return self.u_full[t, mode.columns()]

    def policy_at(self, t: int) -> PolicyRecord:
        return self.gains[int(self.gain_id[t])]


def allocate_log(system: LinearSwitchedSystem, strategy: str, T: int) -> TrajectoryLog:
    n, m = system.n, system.m
    return TrajectoryLog(
        system=system, strategy=strategy, T=T,
        x=np.zeros((T + 1, n)), u_full=np.zeros((T, m)), w=np.zeros((T, n)),
        cost=np.zeros(T), mode_id=np.zeros(T, dtype=int), epoch=np.zeros(T, dtype=int),
        gain_id=np.zeros(T, dtype=int), policy_update=np.zeros(T, dtype=bool),
        logdet_v=np.zeros(T), mu=np.zeros(T), mu_formula=np.zeros(T), z_quad=np.zeros(T),
        radius_epoch=np.zeros(T), trace_residual=np.zeros(T), radius_monitor=np.zeros(T),
        z_norm_sq=np.zeros(T), sdp_status=[""] * T, gains=[])
