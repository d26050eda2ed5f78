import numpy as np
import pytest

from switchlqr.control import RunParams, SwitchSchedule, run_lcsa
from switchlqr.estimation import ConfidenceEllipsoid
from switchlqr.model import optimal_avg_cost
from switchlqr.regret import (decompose_regret, good_event_check, regret_bound_terms,
                              regret_curve, run_naive_baseline, theoretical_bound)


def params_for(T, lam=3e-3, mu_scale=1e-6, x0=None, **kw):
    return RunParams(T=T, delta=0.5 / T, lambda_reg=lam, epsilon=1e-4, mu_scale=mu_scale,
                     x0=np.array(x0) if x0 is not None else None, **kw)


def central_for(system, theta0, lam, r0):
    return ConfidenceEllipsoid(center=theta0, shape=lam * np.eye(system.n + system.m),
                               radius=r0, dim_d=system.m)


@pytest.fixture(scope="module")
def paired_smoke(request):
    system = request.getfixturevalue("experiment_system")
    T = 400
    params = params_for(T, x0=[0.1, -0.1, 0.1])
    theta0 = system.theta_star() + 1e-5
    central = central_for(system, theta0, params.lambda_reg,
                          params.lambda_reg * params.epsilon)
    schedule = SwitchSchedule(times=(0, 150, 300), mode_ids=(1, 2, 1))
    noise = system.sigma_w * np.random.default_rng(77).standard_normal((T, 3))
    lcsa = run_lcsa(system, schedule, central, params, noise=noise)
    naive = run_naive_baseline(system, schedule, theta0, params, noise=noise)
    jstar = {m.id: optimal_avg_cost(system, m) for m in system.modes}
    return system, lcsa, naive, jstar, noise, schedule, params


class TestRegretCurve:
    def test_constant_cost_at_optimum_gives_zero(self, paired_smoke):
        system, lcsa, *_ = paired_smoke
        jstar = {1: 2.0, 2: 2.0}
        log = lcsa
        saved = log.cost.copy()
        try:
            log.cost[:] = 2.0
            rep = regret_curve(log, jstar)
            assert np.allclose(rep.cumulative, 0.0)
        finally:
            log.cost[:] = saved

    def test_single_step_arithmetic(self, paired_smoke):
        _, lcsa, *_ = paired_smoke
        rep = regret_curve(lcsa, {1: 3.0, 2: 3.0})
        assert rep.inst[0] == pytest.approx(lcsa.cost[0] - 3.0)

    def test_cumulative_is_prefix_sum(self, paired_smoke):
        system, lcsa, _, jstar, *_ = paired_smoke
        rep = regret_curve(lcsa, jstar)
        assert np.allclose(rep.cumulative, np.cumsum(rep.inst), atol=0)

    def test_missing_mode_rejected(self, paired_smoke):
        _, lcsa, *_ = paired_smoke
        with pytest.raises(KeyError):
            regret_curve(lcsa, {1: 0.1})


class TestNoiseReconstruction:
    def test_reconstructed_noise_matches_injected(self, paired_smoke):
        system, lcsa, naive, _, noise, *_ = paired_smoke
        for log in (lcsa, naive):
            for t in range(log.T):
                mode = system.mode_by_id(int(log.mode_id[t]))
                Bi = system.B[:, mode.columns()]
                u = log.u_full[t, mode.columns()]
                w = log.x[t + 1] - (system.A @ log.x[t] + Bi @ u)
                assert np.linalg.norm(w - noise[t]) < 1e-12

    def test_common_random_numbers_pairing(self, paired_smoke):
        _, lcsa, naive, *_ = paired_smoke
        assert np.array_equal(lcsa.w, naive.w)


class TestDecomposition:
    def test_zero_noise_replay_kills_cross_and_noise_terms(self, experiment_system):
        T = 120
        params = params_for(T, x0=[0.1, -0.1, 0.1])
        theta0 = experiment_system.theta_star()
        central = central_for(experiment_system, theta0, params.lambda_reg, 3e-7)
        schedule = SwitchSchedule(times=(0,), mode_ids=(1,))
        log = run_lcsa(experiment_system, schedule, central, params,
                       noise=np.zeros((T, 3)))
        curves = decompose_regret(log)
        assert np.allclose(curves["R2"], 0.0, atol=1e-15)
        # w = 0 leaves only the negative trace part in R3
        P_traces = np.array([np.trace(log.gains[int(g)].P) for g in log.gain_id])
        expected = -np.cumsum(experiment_system.sigma_w ** 2 * P_traces)
        assert np.allclose(curves["R3"], expected, rtol=1e-12)

    def test_single_policy_telescoping(self, experiment_system):
        # a huge regularizer freezes the policy after the epoch-start solve, so
        # the telescoping term collapses to the endpoint difference
        T = 200
        params = params_for(T, lam=1e4, mu_scale=0.0, x0=[0.2, -0.1, 0.1])
        theta0 = experiment_system.theta_star()
        central = central_for(experiment_system, theta0, params.lambda_reg, 1.0)
        schedule = SwitchSchedule(times=(0,), mode_ids=(1,))
        log = run_lcsa(experiment_system, schedule, central, params,
                       rng=np.random.default_rng(12))
        assert len(log.gains) == 1
        curves = decompose_regret(log)
        P = log.gains[0].P
        expected = log.x[0] @ P @ log.x[0] - log.x[T] @ P @ log.x[T]
        assert curves["R1"][-1] == pytest.approx(expected, rel=1e-10)

    def test_event_mask_zeroes_excluded_steps(self, paired_smoke):
        _, lcsa, *_ = paired_smoke
        event = np.zeros(lcsa.T, dtype=bool)
        curves = decompose_regret(lcsa, event=event)
        for key in ("R1", "R2", "R3", "R4"):
            assert np.allclose(curves[key], 0.0)

    def test_r4_prefactor_and_mu_source_options(self, paired_smoke):
        _, lcsa, *_ = paired_smoke
        c4 = decompose_regret(lcsa, r4_prefactor="4nu")
        c8 = decompose_regret(lcsa, r4_prefactor="8nu")
        assert c8["R4"][-1] == pytest.approx(2 * c4["R4"][-1], rel=1e-12)
        cu = decompose_regret(lcsa, mu_source="used")
        assert cu["R4"][-1] <= c4["R4"][-1]  # the scaled mu is much smaller
        assert c4["meta"]["r4_prefactor"] == "4nu"


class TestGoodEvent:
    def test_all_steps_good_on_smoke_run(self, paired_smoke):
        system, lcsa, *_ = paired_smoke
        ev = good_event_check(lcsa, kappa_star=210.8, chi=1e-3, upsilon=1e20,
                              gamma_star=2.37e-3)
        assert ev.dtype == bool and ev.shape == (lcsa.T,)
        assert ev.all()

    def test_zero_initial_state_reduces_z_condition(self, paired_smoke):
        system, lcsa, *_ = paired_smoke
        # with x0 = 0 the z-condition is the flat energy level alone
        saved = lcsa.x[0].copy()
        try:
            lcsa.x[0] = 0.0
            level = 1.0 / (2 * 0.5 ** 2)  # upsilon=1, gamma*=0.5
            ev = good_event_check(lcsa, kappa_star=1.0, chi=0.5, upsilon=1.0,
                                  gamma_star=0.5)
            manual = (lcsa.trace_residual <= lcsa.radius_monitor * (1 + 1e-9) + 1e-15) \
                & (lcsa.z_norm_sq <= level)
            assert np.array_equal(ev, manual)
        finally:
            lcsa.x[0] = saved

    def test_confidence_violation_detected(self, paired_smoke):
        _, lcsa, *_ = paired_smoke
        saved = lcsa.trace_residual.copy()
        try:
            lcsa.trace_residual[5] = lcsa.radius_monitor[5] * 2.0 + 1.0
            ev = good_event_check(lcsa, 210.8, 1e-3, 1e20, 2.37e-3)
            assert not ev[5]
            assert ev[:5].all()
        finally:
            lcsa.trace_residual = saved


class TestTheoreticalBound:
    # modest constants keep all additive terms within float64 resolution of
    # each other; the benchmark-scale evaluation is exercised in acceptance
    ARGS = dict(n=3, m=3, T=2000.0, delta=1e-3, sigma_w=0.5, theta_bound=3.0,
                nu_bar=2.0, kappa_star=2.0, chi=0.05, epsilon=1e-3, lam=0.5)

    def test_monotone_in_switch_count(self):
        b1 = theoretical_bound(ns=1, **self.ARGS)
        b3 = theoretical_bound(ns=3, **self.ARGS)
        assert b3 > b1

    def test_sqrt_horizon_scaling(self):
        base = dict(self.ARGS, ns=3)
        b1 = theoretical_bound(**base)
        b4 = theoretical_bound(**dict(base, T=4 * base["T"]))
        # sqrt growth doubles the dominant term; the residual polylog factors
        # decay very slowly, so allow them a generous multiplicative band
        assert 1.9 <= b4 / b1 <= 4.0

    def test_monotone_sweeps(self):
        base = dict(self.ARGS, ns=2)
        assert theoretical_bound(**dict(base, kappa_star=4.0)) > theoretical_bound(**base)
        assert theoretical_bound(**dict(base, delta=1e-5)) > theoretical_bound(**base)
        assert theoretical_bound(**dict(base, T=3 * base["T"])) > theoretical_bound(**base)

    def test_terms_are_all_positive(self):
        terms = regret_bound_terms(ns=3, **self.ARGS)
        for key in ("R1", "R2", "R3", "R4"):
            assert terms[key] > 0


class TestNaiveBaseline:
    def test_single_epoch_coincides_with_projection_strategy(self, experiment_system):
        # with no switches, matching anchors and radii the two strategies are
        # the same algorithm; runs must agree bitwise under shared noise
        T = 250
        lam = 3e-3
        params = RunParams(T=T, delta=0.5 / T, lambda_reg=lam, epsilon=1e-4,
                           mu_scale=1e-6, x0=np.array([0.1, -0.1, 0.1]))
        theta0 = experiment_system.theta_star() + 1e-5
        central = central_for(experiment_system, theta0, lam, lam * params.epsilon ** 2)
        schedule = SwitchSchedule(times=(0,), mode_ids=(1,))
        noise = experiment_system.sigma_w * np.random.default_rng(31).standard_normal((T, 3))
        lcsa = run_lcsa(experiment_system, schedule, central, params, noise=noise)
        naive = run_naive_baseline(experiment_system, schedule, theta0, params, noise=noise)
        assert np.array_equal(lcsa.x, naive.x)
        assert np.array_equal(lcsa.u_full, naive.u_full)
        assert np.array_equal(lcsa.mu, naive.mu)

    def test_projection_carries_more_information_after_switch(self, paired_smoke):
        _, lcsa, naive, _, _, schedule, _ = paired_smoke
        tau2 = schedule.times[1]
        # determinant of the epoch covariance right after the switch
        assert lcsa.logdet_v[tau2] > naive.logdet_v[tau2]
        assert lcsa.logdet_v[tau2 + 1] > naive.logdet_v[tau2 + 1]

    def test_every_epoch_starts_with_policy_update(self, paired_smoke):
        _, lcsa, naive, _, _, schedule, _ = paired_smoke
        for log in (lcsa, naive):
            for tau in schedule.times:
                assert log.policy_update[tau]
                assert log.sdp_status[tau] != ""


class TestProjectionDiagnostics:
    def test_logdet_ratio_checked_at_every_switch(self, paired_smoke):
        _, lcsa, _, _, _, schedule, _ = paired_smoke
        checks = lcsa.metadata["projection_checks"]
        assert len(checks) == len(schedule.times)
        # the diagnostic compares against the almost-sure bound; with the
        # energy level of this plant it holds at every switch
        assert all(c["ok"] for c in checks[1:])


class TestDecompositionAudit:
    def test_realized_regret_below_decomposition_on_good_steps(self, paired_smoke):
        system, lcsa, naive, jstar, _, _, params = paired_smoke
        for log in (lcsa, naive):
            ev = good_event_check(log, kappa_star=210.8, chi=1e-3, upsilon=1.5e20,
                                  gamma_star=2.37e-3)
            rep = regret_curve(log, jstar)
            curves = decompose_regret(log, event=ev)
            realized = float(np.sum(rep.inst[ev]))
            decomposed = sum(float(curves[k][-1]) for k in ("R1", "R2", "R3", "R4"))
            assert realized <= decomposed + 1e-9
