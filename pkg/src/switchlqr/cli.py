"""Experiment entry point: config loading, paired Monte-Carlo runs, artifacts.

A single JSON config describes the plant, the mode catalog, the switch
schedule and every algorithm knob.  `run` executes paired projection /
restart runs over the configured seeds with common random numbers, then
writes per-seed CSV logs, an aggregate CSV, a text summary and a
self-contained SVG of the mean cumulative regret.  `validate` checks a
config without running; `bound` prints the closed-form regret bound.

Exit codes: 0 success, 2 validation failure, 3 runtime abort.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys as _sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import control
from .control import (InstabilityAbort, MadtParams, RunParams, ScheduleError, SwitchSchedule,
                      WarmupConfig, run_lcsa, run_warmup, stability_params)
from .estimation import ConfidenceEllipsoid, upsilon_bar
from .model import LinearSwitchedSystem, Mode, ModelError, optimal_avg_cost
from .regret import (RegretReport, good_event_check, regret_bound_terms, regret_curve,
                     run_naive_baseline, theoretical_bound)
from .trajectory import TrajectoryLog

# schema v1; tests pin the exact header string
CSV_SCHEMA_VERSION = 1
CSV_HEADER = ("t,mode,epoch,x_norm,cost,jstar,inst_regret,cum_regret,"
              "policy_update,logdet_v,mu,sdp_status,good_event")

SVG_COLORS = {"lcsa": "#1f77b4", "naive": "#d62728"}


class ConfigError(ValueError):
    """Invalid experiment configuration; message names field and constraint."""


@dataclass
class ExperimentConfig:
    """Validated experiment description (plain data, JSON round-trippable)."""

    name: str
    system: dict[str, Any]
    horizon: int
    delta: float
    epsilon: float
    schedule: dict[str, Any]
    seeds: list[int]
    x0: list[float] | None = None
    lambda_reg: float | None = None
    mu_scale: float = 1.0
    central_radius_mode: str = "lambda_eps"
    initial_estimate: str = "given"
    warmup: dict[str, Any] | None = None
    madt: dict[str, Any] = field(default_factory=lambda: {
        "enforce": False, "chi": 1e-3, "gamma_star_convention": "thm3"})
    solver: dict[str, Any] = field(default_factory=lambda: {"tol": 1e-9, "max_iter": 500})
    workers: int = 1

    # -- construction helpers -------------------------------------------------

    def build_system(self) -> LinearSwitchedSystem:
        s = self.system
        try:
            modes = tuple(Mode(int(md["id"]), tuple(int(a) for a in md["actuators"]))
                          for md in s["modes"])
            return LinearSwitchedSystem(
                A=np.array(s["A"], dtype=float), B=np.array(s["B"], dtype=float),
                Q=np.array(s["Q"], dtype=float), R=np.array(s["R"], dtype=float),
                sigma_w=float(s["sigma_w"]), theta_bound=float(s["theta_bound"]),
                nu_bound=float(s["nu_bound"]), alpha0=float(s["alpha0"]), modes=modes)
        except (ModelError, KeyError, TypeError) as exc:
            raise ConfigError(f"system: {exc}") from exc

    def build_schedule(self) -> SwitchSchedule:
        sch = self.schedule
        try:
            mode_ids = sch.get("mode_ids", "auto")
            if mode_ids != "auto":
                mode_ids = tuple(int(i) for i in mode_ids)
            return SwitchSchedule(times=tuple(int(t) for t in sch["times"]), mode_ids=mode_ids)
        except (ScheduleError, KeyError, TypeError) as exc:
            raise ConfigError(f"schedule: {exc}") from exc

    def kappa_gamma_star(self) -> tuple[float, float]:
        kappa_star, gamma_thm3 = stability_params(
            float(self.system["nu_bound"]), float(self.system["alpha0"]),
            float(self.system["sigma_w"]))
        conv = self.madt.get("gamma_star_convention", "thm3")
        if conv == "thm3":
            return kappa_star, gamma_thm3
        if conv == "thm4":
            return kappa_star, 1.0 / (2.0 * kappa_star)
        raise ConfigError(f"madt.gamma_star_convention: unknown value {conv!r}")

    def madt_params(self) -> MadtParams:
        kappa_star, gamma_star = self.kappa_gamma_star()
        try:
            return MadtParams(kappa_star=kappa_star, gamma_star=gamma_star,
                              chi=float(self.madt.get("chi", 1e-3)))
        except control.ControlError as exc:
            raise ConfigError(f"madt: {exc}") from exc

    def resolve_lambda(self) -> tuple[float, str]:
        """Configured lambda, or the closed-form 4 nu mu_bar / (alpha0 sigma^2)."""
        if self.lambda_reg is not None:
            return float(self.lambda_reg), "config"
        s = self.system
        sigma, alpha0, nu = float(s["sigma_w"]), float(s["alpha0"]), float(s["nu_bound"])
        kappa_star, gamma_star = self.kappa_gamma_star()
        n = len(s["A"])
        m = len(s["B"][0])
        terms = regret_bound_terms(
            n=n, m=m, ns=len(self.schedule["times"]), T=float(self.horizon),
            delta=self.delta, sigma_w=sigma, theta_bound=float(s["theta_bound"]),
            nu_bar=nu, kappa_star=kappa_star, chi=float(self.madt.get("chi", 1e-3)),
            epsilon=self.epsilon, lam=1.0, gamma_star=gamma_star)
        return 4.0 * nu * terms["mu_bar"] / (alpha0 * sigma ** 2), "derived"

    def central_radius(self, lam: float) -> float:
        if self.central_radius_mode == "lambda_eps":
            return lam * self.epsilon
        if self.central_radius_mode == "lambda_eps_sq":
            return lam * self.epsilon ** 2
        raise ConfigError(
            f"central_radius_mode: unknown value {self.central_radius_mode!r}")

    def warmup_config(self, m: int, n: int) -> WarmupConfig:
        if self.warmup is None:
            raise ConfigError("warmup: block required when initial_estimate='warmup'")
        w = self.warmup
        try:
            return WarmupConfig(K0=np.array(w["K0"], dtype=float), kappa0=float(w["kappa0"]),
                                gamma0=float(w["gamma0"]), C0=float(w.get("C0", 1.0)),
                                eps0=float(w.get("eps0", 1.0)),
                                T0=int(w["T0"]) if w.get("T0") is not None else None)
        except (KeyError, TypeError, control.ControlError) as exc:
            raise ConfigError(f"warmup: {exc}") from exc

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(
        json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def bundled_config_path(name: str) -> Path:
    """Path of a config shipped with the package (e.g. 'paper_experiment')."""
    ref = resources.files("switchlqr") / "configs" / f"{name}.json"
    with resources.as_file(ref) as path:
        return Path(path)


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and fully validate an experiment config file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    missing = [k for k in ("name", "system", "horizon", "delta", "epsilon",
                           "schedule", "seeds") if k not in raw]
    if missing:
        raise ConfigError(f"missing required config fields: {missing}")
    cfg = ExperimentConfig(**raw)
    validate_config(cfg)
    return cfg


def write_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def validate_config(cfg: ExperimentConfig) -> None:
    """Cross-field validation; raises ConfigError naming the offending field."""
    if cfg.horizon <= 0:
        raise ConfigError("horizon: must be positive")
    if not (0.0 < cfg.delta < 1.0):
        raise ConfigError("delta: must lie in (0, 1)")
    if cfg.epsilon <= 0:
        raise ConfigError("epsilon: must be positive")
    if not cfg.seeds:
        raise ConfigError("seeds: at least one seed is required")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        raise ConfigError("seeds: duplicates are not allowed")
    if cfg.mu_scale < 0:
        raise ConfigError("mu_scale: must be nonnegative")
    if cfg.workers < 1:
        raise ConfigError("workers: must be at least 1")
    system = cfg.build_system()
    schedule = cfg.build_schedule()
    if schedule.times[-1] >= cfg.horizon:
        raise ConfigError("schedule.times: last switch must precede the horizon")
    if not schedule.auto:
        for mid in schedule.mode_ids:
            try:
                system.mode_by_id(mid)
            except ModelError as exc:
                raise ConfigError(f"schedule.mode_ids: {exc}") from exc
    if cfg.x0 is not None and len(cfg.x0) != system.n:
        raise ConfigError("x0: length must equal the state dimension")
    lam, _ = cfg.resolve_lambda()
    if lam <= 0:
        raise ConfigError("lambda_reg: must be positive")
    cfg.central_radius(lam)
    for mode in system.modes:
        j = optimal_avg_cost(system, mode)
        if j > system.nu_bound * (1.0 + 1e-9):
            raise ConfigError(
                f"system.nu_bound: optimal cost {j:.6g} of mode {mode.id} exceeds the bound")
    if cfg.madt.get("enforce", False):
        madt = cfg.madt_params()
        if len(schedule.times) > 1 and schedule.min_gap() < madt.tau_mad:
            raise ConfigError(
                f"schedule.times: gap {schedule.min_gap()} is below tau_mad={madt.tau_mad} "
                "with MADT enforcement on")
    if cfg.initial_estimate not in ("given", "warmup"):
        raise ConfigError(f"initial_estimate: unknown value {cfg.initial_estimate!r}")
    if cfg.initial_estimate == "warmup":
        wc = cfg.warmup_config(system.m, system.n)
        if wc.K0.shape != (system.m, system.n):
            raise ConfigError("warmup.K0: shape must be m x n")


# -- per-seed execution -------------------------------------------------------


@dataclass
class SeedResult:
    seed: int
    strategy: str
    log: TrajectoryLog | None
    report: RegretReport | None
    aborted: str | None = None


def _theta0_for_seed(cfg: ExperimentConfig, system: LinearSwitchedSystem,
                     seed: int) -> tuple[np.ndarray, dict[str, Any]]:
    """Anchor estimate: warm-up output, or a granted eps-accurate perturbation."""
    if cfg.initial_estimate == "warmup":
        wc = cfg.warmup_config(system.m, system.n)
        rng = np.random.default_rng([seed, 23])
        ell, wlog = run_warmup(system, wc, cfg.delta, rng, T0=wc.T0)
        return ell.center, {"warmup_radius": ell.radius, "warmup_T0": wlog.T}
    rng = np.random.default_rng([seed, 17])
    G = rng.standard_normal((system.n + system.m, system.n))
    G *= cfg.epsilon / np.sum(np.linalg.svd(G, compute_uv=False))  # trace-norm eps
    return system.theta_star() + G, {}


def _run_one_seed(cfg_dict: dict[str, Any], seed: int, strategies: tuple[str, ...],
                  enforce_madt: bool) -> list[SeedResult]:
    cfg = ExperimentConfig(**cfg_dict)
    system = cfg.build_system()
    schedule = cfg.build_schedule()
    lam, _ = cfg.resolve_lambda()
    madt = cfg.madt_params() if cfg.madt.get("enforce", False) or enforce_madt else None
    kappa_star, gamma_star = cfg.kappa_gamma_star()
    chi = float(cfg.madt.get("chi", 1e-3))
    ups = upsilon_bar(kappa_star, chi, system.sigma_w, system.n, cfg.horizon, cfg.delta)
    params = RunParams(
        T=cfg.horizon, delta=cfg.delta, lambda_reg=lam, epsilon=cfg.epsilon,
        mu_scale=cfg.mu_scale, sdp_tol=float(cfg.solver.get("tol", 1e-9)),
        sdp_max_iter=int(cfg.solver.get("max_iter", 500)),
        x0=np.array(cfg.x0, dtype=float) if cfg.x0 is not None else None,
        madt=madt, enforce_madt=enforce_madt and madt is not None, madt_upsilon=ups)

    rng = np.random.default_rng(seed)
    noise = system.sigma_w * rng.standard_normal((cfg.horizon, system.n))
    theta0, extra = _theta0_for_seed(cfg, system, seed)
    central = ConfidenceEllipsoid(center=theta0,
                                  shape=lam * np.eye(system.n + system.m),
                                  radius=cfg.central_radius(lam), dim_d=system.m)

    jstar = {mode.id: optimal_avg_cost(system, mode) for mode in system.modes}
    bound_terms = regret_bound_terms(
        n=system.n, m=system.m, ns=len(cfg.schedule["times"]), T=float(cfg.horizon),
        delta=cfg.delta, sigma_w=system.sigma_w, theta_bound=system.theta_bound,
        nu_bar=system.nu_bound, kappa_star=kappa_star, chi=chi, epsilon=cfg.epsilon,
        lam=lam, gamma_star=gamma_star,
        x0_norm=float(np.linalg.norm(cfg.x0)) if cfg.x0 else 0.0)

    results: list[SeedResult] = []
    realized_modes: tuple[int, ...] | None = None
    for strategy in strategies:
        run_params = params
        if strategy == "naive" and schedule.auto:
            run_params = RunParams(**{**params.__dict__, "auto_mode_override": realized_modes})
        try:
            if strategy == "lcsa":
                log = run_lcsa(system, schedule, central, run_params, noise=noise)
                realized_modes = tuple(int(log.mode_id[t]) for t in schedule.times)
            else:
                log = run_naive_baseline(system, schedule, theta0, run_params, noise=noise)
        except InstabilityAbort as exc:
            results.append(SeedResult(seed, strategy, None, None, aborted=str(exc)))
            continue
        log.metadata.update({"seed": seed, "config_hash": config_hash(cfg),
                             "upsilon_bar": ups, "mu_bar": bound_terms["mu_bar"],
                             "central_radius_mode": cfg.central_radius_mode, **extra})
        report = regret_curve(log, jstar)
        report.good_event = good_event_check(log, kappa_star, chi, ups, gamma_star)
        report.good_event_violations = int(log.T - report.good_event.sum())
        ts = np.arange(1.0, cfg.horizon + 1.0)
        report.bound_curve = theoretical_bound(
            n=system.n, m=system.m, ns=len(cfg.schedule["times"]), T=ts, delta=cfg.delta,
            sigma_w=system.sigma_w, theta_bound=system.theta_bound, nu_bar=system.nu_bound,
            kappa_star=kappa_star, chi=chi, epsilon=cfg.epsilon, lam=lam,
            gamma_star=gamma_star,
            x0_norm=float(np.linalg.norm(cfg.x0)) if cfg.x0 else 0.0)
        results.append(SeedResult(seed, strategy, log, report))
    return results


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path,
                   strategies: tuple[str, ...] = ("lcsa", "naive"),
                   enforce_madt: bool | None = None,
                   workers: int | None = None) -> dict[str, Any]:
    """Execute all seeds, write artifacts, and return results in memory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if enforce_madt is None:
        enforce_madt = bool(cfg.madt.get("enforce", False))
    if enforce_madt:
        schedule = cfg.build_schedule()
        madt = cfg.madt_params()
        if len(schedule.times) > 1 and schedule.min_gap() < madt.tau_mad:
            raise ConfigError(
                f"schedule.times: gap {schedule.min_gap()} below tau_mad={madt.tau_mad}")
    workers = workers if workers is not None else cfg.workers
    cfg_dict = cfg.to_dict()
    all_results: list[SeedResult] = []
    if workers <= 1 or len(cfg.seeds) == 1:
        for seed in cfg.seeds:
            all_results.extend(_run_one_seed(cfg_dict, seed, strategies, enforce_madt))
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(cfg.seeds))) as pool:
            futures = [pool.submit(_run_one_seed, cfg_dict, seed, strategies, enforce_madt)
                       for seed in cfg.seeds]
            for fut in futures:
                all_results.extend(fut.result())
    paths = emit_outputs(all_results, out, cfg)
    aborted = [r for r in all_results if r.aborted]
    return {"results": all_results, "paths": paths, "aborted": aborted}


# -- artifact emission --------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def _csv_rows(log: TrajectoryLog, report: RegretReport) -> list[str]:
    rows = []
    good = report.good_event if report.good_event is not None else np.ones(log.T, dtype=bool)
    cum = report.cumulative
    x_norm = np.linalg.norm(log.x[:-1], axis=1)
    for t in range(log.T):
        jstar = report.jstar_by_mode[int(log.mode_id[t])]
        rows.append(",".join([
            str(t), str(int(log.mode_id[t])), str(int(log.epoch[t])),
            _fmt(x_norm[t]), _fmt(log.cost[t]), _fmt(jstar), _fmt(report.inst[t]),
            _fmt(cum[t]), str(int(log.policy_update[t])), _fmt(log.logdet_v[t]),
            _fmt(log.mu[t]), log.sdp_status[t], str(int(good[t])),
        ]))
    return rows


def emit_outputs(results: list[SeedResult], out: Path, cfg: ExperimentConfig) -> dict[str, Path]:
    """Write per-seed CSVs, the aggregate CSV, the summary and the SVG plot."""
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    by_strategy: dict[str, list[SeedResult]] = {}
    for res in results:
        by_strategy.setdefault(res.strategy, []).append(res)
        if res.log is None or res.report is None:
            continue
        p = out / f"seed{res.seed:03d}_{res.strategy}.csv"
        p.write_text("\n".join([CSV_HEADER] + _csv_rows(res.log, res.report)) + "\n")
        paths[f"seed{res.seed:03d}_{res.strategy}"] = p

    strategies = [s for s in ("lcsa", "naive") if s in by_strategy]
    curves: dict[str, np.ndarray] = {}
    agg_cols: dict[str, np.ndarray] = {}
    T = cfg.horizon
    for strat in strategies:
        done = [r.report.cumulative for r in by_strategy[strat] if r.report is not None]
        if not done:
            continue
        M = np.vstack(done)
        agg_cols[f"{strat}_mean"] = M.mean(axis=0)
        agg_cols[f"{strat}_min"] = M.min(axis=0)
        agg_cols[f"{strat}_max"] = M.max(axis=0)
        curves[strat] = agg_cols[f"{strat}_mean"]
    if agg_cols:
        header = "t," + ",".join(agg_cols)
        lines = [header]
        for t in range(T):
            lines.append(str(t) + "," + ",".join(_fmt(col[t]) for col in agg_cols.values()))
        agg_path = out / "aggregate.csv"
        agg_path.write_text("\n".join(lines) + "\n")
        paths["aggregate"] = agg_path

    summary_path = out / "summary.txt"
    summary_path.write_text(_summary_text(results, cfg))
    paths["summary"] = summary_path

    if curves:
        svg_path = out / "regret.svg"
        svg_path.write_text(render_regret_svg(curves, cfg.schedule["times"],
                                              title=f"mean cumulative regret: {cfg.name}"))
        paths["svg"] = svg_path
    return paths


def _summary_text(results: list[SeedResult], cfg: ExperimentConfig) -> str:
    system = cfg.build_system()
    lam, lam_source = cfg.resolve_lambda()
    kappa_star, gamma_star = cfg.kappa_gamma_star()
    chi = float(cfg.madt.get("chi", 1e-3))
    ups = upsilon_bar(kappa_star, chi, system.sigma_w, system.n, cfg.horizon, cfg.delta)
    bound = theoretical_bound(
        n=system.n, m=system.m, ns=len(cfg.schedule["times"]), T=float(cfg.horizon),
        delta=cfg.delta, sigma_w=system.sigma_w, theta_bound=system.theta_bound,
        nu_bar=system.nu_bound, kappa_star=kappa_star, chi=chi, epsilon=cfg.epsilon,
        lam=lam, gamma_star=gamma_star,
        x0_norm=float(np.linalg.norm(cfg.x0)) if cfg.x0 else 0.0)
    madt = cfg.madt_params() if cfg.madt.get("enforce", False) else None

    lines = [
        f"experiment: {cfg.name}",
        f"config_hash: {config_hash(cfg)}",
        f"T: {cfg.horizon}  switches: {cfg.schedule['times']}  "
        f"mode_ids: {cfg.schedule.get('mode_ids', 'auto')}",
        f"delta: {_fmt(cfg.delta)}  sigma_w: {_fmt(system.sigma_w)}  "
        f"epsilon: {_fmt(cfg.epsilon)}",
        f"lambda: {_fmt(lam)} ({lam_source})  mu_scale: {_fmt(cfg.mu_scale)}  "
        f"central_radius_mode: {cfg.central_radius_mode}",
        f"kappa_star: {_fmt(kappa_star)}  gamma_star: {_fmt(gamma_star)}  chi: {_fmt(chi)}",
        f"upsilon_bar: {_fmt(ups)}",
        f"tau_mad: {madt.tau_mad if madt else 'not enforced'}",
        f"theoretical_regret_bound: {_fmt(bound)}",
        f"initial_estimate: {cfg.initial_estimate}",
        f"csv_schema: v{CSV_SCHEMA_VERSION}",
        "",
    ]
    by_seed: dict[int, dict[str, SeedResult]] = {}
    for res in results:
        by_seed.setdefault(res.seed, {})[res.strategy] = res
    finals: dict[str, list[float]] = {}
    orderings = []
    lines.append("per-seed final cumulative regret:")
    for seed in sorted(by_seed):
        row = [f"  seed {seed}:"]
        for strat in ("lcsa", "naive"):
            res = by_seed[seed].get(strat)
            if res is None:
                continue
            if res.aborted:
                row.append(f"{strat}=ABORTED({res.aborted})")
            else:
                val = float(res.report.cumulative[-1])
                finals.setdefault(strat, []).append(val)
                row.append(f"{strat}={_fmt(val)}")
        pair = by_seed[seed]
        if ("lcsa" in pair and "naive" in pair and not pair["lcsa"].aborted
                and not pair["naive"].aborted):
            ok = float(pair["lcsa"].report.cumulative[-1]) <= float(
                pair["naive"].report.cumulative[-1])
            orderings.append(ok)
            row.append(f"lcsa<=naive: {ok}")
        lines.append(" ".join(row))
    lines.append("")
    for strat, vals in finals.items():
        arr = np.array(vals)
        lines.append(f"{strat}: mean={_fmt(arr.mean())} min={_fmt(arr.min())} "
                     f"max={_fmt(arr.max())} n={len(vals)}")
    if orderings:
        lines.append(f"ordering fraction (lcsa <= naive): "
                     f"{_fmt(float(np.mean(orderings)))} over {len(orderings)} pairs")
    viol = {s: sum(r.report.good_event_violations for r in rs if r.report is not None)
            for s, rs in _group(results).items()}
    lines.append("good-event violations: " + " ".join(f"{s}={v}" for s, v in sorted(viol.items())))
    for strat, rs in sorted(_group(results).items()):
        rho_max = 0.0
        xmax = 0.0
        for r in rs:
            if r.log is None:
                continue
            xmax = max(xmax, float(np.linalg.norm(r.log.x, axis=1).max()))
            for g in r.log.gains:
                mode = r.log.system.mode_by_id(g.mode_id)
                Acl = r.log.system.A + r.log.system.B[:, mode.columns()] @ g.K
                rho_max = max(rho_max, float(np.max(np.abs(np.linalg.eigvals(Acl)))))
        lines.append(f"{strat}: max_closed_loop_spectral_radius={_fmt(rho_max)} "
                     f"max_state_norm={_fmt(xmax)}")
    return "\n".join(lines) + "\n"


def _group(results: list[SeedResult]) -> dict[str, list[SeedResult]]:
    out: dict[str, list[SeedResult]] = {}
    for r in results:
        out.setdefault(r.strategy, []).append(r)
    return out


# -- SVG ----------------------------------------------------------------------

SVG_W, SVG_H = 960.0, 560.0
SVG_ML, SVG_MR, SVG_MT, SVG_MB = 75.0, 25.0, 45.0, 55.0


def svg_axis_mapping(T: int, ymin: float, ymax: float):
    """Affine data->pixel maps used by the plot (exposed so tests can invert them)."""
    if ymax <= ymin:
        ymax = ymin + 1.0
    xspan = SVG_W - SVG_ML - SVG_MR
    yspan = SVG_H - SVG_MT - SVG_MB

    def fx(t: float) -> float:
        return SVG_ML + (t / max(T - 1, 1)) * xspan

    def fy(v: float) -> float:
        return SVG_H - SVG_MB - (v - ymin) / (ymax - ymin) * yspan

    return fx, fy


def render_regret_svg(curves: dict[str, np.ndarray], switch_times: list[int],
                      title: str = "") -> str:
    """Self-contained SVG: one polyline per strategy, switch times marked."""
    T = max(len(c) for c in curves.values())
    ymin = min(float(c.min()) for c in curves.values())
    ymax = max(float(c.max()) for c in curves.values())
    pad = 0.05 * (ymax - ymin or 1.0)
    ymin, ymax = ymin - pad, ymax + pad
    fx, fy = svg_axis_mapping(T, ymin, ymax)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W:g}" height="{SVG_H:g}" '
        f'viewBox="0 0 {SVG_W:g} {SVG_H:g}">',
        f'<rect width="{SVG_W:g}" height="{SVG_H:g}" fill="white"/>',
        f'<text x="{SVG_W / 2:g}" y="25" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{title}</text>',
    ]
    # axes
    x0, y0 = fx(0), fy(ymin)
    x1, y1 = fx(T - 1), fy(ymax)
    parts.append(f'<line x1="{x0:g}" y1="{y0:g}" x2="{x1:g}" y2="{y0:g}" stroke="black"/>')
    parts.append(f'<line x1="{x0:g}" y1="{y0:g}" x2="{x0:g}" y2="{y1:g}" stroke="black"/>')
    for k in range(6):
        tv = k * (T - 1) / 5.0
        vv = ymin + k * (ymax - ymin) / 5.0
        parts.append(f'<line x1="{fx(tv):g}" y1="{y0:g}" x2="{fx(tv):g}" y2="{y0 + 5:g}" '
                     'stroke="black"/>')
        parts.append(f'<text x="{fx(tv):g}" y="{y0 + 20:g}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{tv:g}</text>')
        parts.append(f'<line x1="{x0 - 5:g}" y1="{fy(vv):g}" x2="{x0:g}" y2="{fy(vv):g}" '
                     'stroke="black"/>')
        parts.append(f'<text x="{x0 - 8:g}" y="{fy(vv) + 4:g}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{vv:.4g}</text>')
    parts.append(f'<text x="{(x0 + x1) / 2:g}" y="{SVG_H - 12:g}" text-anchor="middle" '
                 'font-family="sans-serif" font-size="13">t</text>')
    for st in switch_times:
        if st <= 0:
            continue
        parts.append(f'<line x1="{fx(st):g}" y1="{y0:g}" x2="{fx(st):g}" y2="{y1:g}" '
                     'stroke="gray" stroke-dasharray="5,4"/>')
    for idx, (name, curve) in enumerate(sorted(curves.items())):
        color = SVG_COLORS.get(name, "#2ca02c")
        pts = " ".join(f"{_fmt(fx(t))},{_fmt(fy(float(curve[t])))}" for t in range(len(curve)))
        parts.append(f'<polyline id="curve_{name}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5" points="{pts}"/>')
        ly = SVG_MT + 16 * idx
        parts.append(f'<line x1="{x1 - 150:g}" y1="{ly:g}" x2="{x1 - 120:g}" y2="{ly:g}" '
                     f'stroke="{color}" stroke-width="3"/>')
        parts.append(f'<text x="{x1 - 114:g}" y="{ly + 4:g}" font-family="sans-serif" '
                     f'font-size="12">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# -- command line -------------------------------------------------------------


def _resolve_config_arg(arg: str) -> Path:
    p = Path(arg)
    if p.exists():
        return p
    try:
        return bundled_config_path(arg)
    except (FileNotFoundError, ModuleNotFoundError):
        raise ConfigError(f"config not found: {arg}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="switchlqr",
        description="Adaptive LQR across actuator-mode switches: run, validate, bound.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment described by a config")
    p_run.add_argument("config", help="config path or bundled config name")
    p_run.add_argument("--out", default=None, help="output directory (default out/<name>)")
    p_run.add_argument("--seeds", type=int, default=None,
                       help="use the first N config seeds (extending consecutively if needed)")
    p_run.add_argument("--strategy", choices=["lcsa", "naive", "both"], default="both")
    p_run.add_argument("--no-madt-check", action="store_true",
                       help="disable dwell-time schedule enforcement")
    p_run.add_argument("--workers", type=int, default=None)

    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("config")

    p_bound = sub.add_parser("bound", help="print the closed-form regret bound")
    p_bound.add_argument("config")

    args = parser.parse_args(argv)
    try:
        cfg = load_config(_resolve_config_arg(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2

    if args.command == "validate":
        print(f"{cfg.name}: OK (hash {config_hash(cfg)})")
        return 0

    if args.command == "bound":
        system = cfg.build_system()
        kappa_star, gamma_star = cfg.kappa_gamma_star()
        chi = float(cfg.madt.get("chi", 1e-3))
        lam, _ = cfg.resolve_lambda()
        terms = regret_bound_terms(
            n=system.n, m=system.m, ns=len(cfg.schedule["times"]), T=float(cfg.horizon),
            delta=cfg.delta, sigma_w=system.sigma_w, theta_bound=system.theta_bound,
            nu_bar=system.nu_bound, kappa_star=kappa_star, chi=chi,
            epsilon=cfg.epsilon, lam=lam, gamma_star=gamma_star,
            x0_norm=float(np.linalg.norm(cfg.x0)) if cfg.x0 else 0.0)
        total = terms["R1"] + terms["R2"] + terms["R3"] + terms["R4"]
        for key in ("R1", "R2", "R3", "R4"):
            print(f"{key}_bound: {terms[key]:.6g}")
        print(f"total: {total:.6g}")
        return 0

    # run
    if args.seeds is not None:
        seeds = list(cfg.seeds)[: args.seeds]
        nxt = (max(cfg.seeds) if cfg.seeds else 0) + 1
        while len(seeds) < args.seeds:
            seeds.append(nxt)
            nxt += 1
        cfg.seeds = seeds
    strategies = ("lcsa", "naive") if args.strategy == "both" else (args.strategy,)
    out_dir = Path(args.out) if args.out else Path("out") / cfg.name
    try:
        outcome = run_experiment(cfg, out_dir, strategies=strategies,
                                 enforce_madt=False if args.no_madt_check else None,
                                 workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2
    except InstabilityAbort as exc:
        print(f"runtime abort: {exc}", file=_sys.stderr)
        return 3
    if outcome["aborted"]:
        for res in outcome["aborted"]:
            print(f"seed {res.seed} {res.strategy}: aborted: {res.aborted}", file=_sys.stderr)
        return 3
    print(f"wrote {len(outcome['paths'])} artifacts to {out_dir}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
