import json

import numpy as np
import pytest

from delayq import theory
from delayq.behavior import softmax


@pytest.fixture(scope="module")
def mdp5():
    return theory.random_mdp(5, 3, 0.9, np.random.default_rng(7))


class TestSmallMdp:
    def test_row_stochastic_validated(self):
        bad = np.ones((2, 1, 2)) * 0.6
        with pytest.raises(ValueError, match="sum to 1"):
            theory.SmallMdp(transitions=bad, rewards=np.zeros((2, 1)), gamma=0.9)

    def test_negative_rewards_rejected(self):
        t = np.ones((1, 1, 1))
        with pytest.raises(ValueError, match="nonnegative"):
            theory.SmallMdp(transitions=t, rewards=np.array([[-1.0]]), gamma=0.9)

    def test_v_max(self):
        mdp = theory.SmallMdp(np.ones((1, 1, 1)), np.array([[2.0]]), gamma=0.5)
        assert mdp.v_max == 4.0


class TestValueIteration:
    def test_geometric_series(self):
        mdp = theory.SmallMdp(np.ones((1, 1, 1)), np.array([[1.0]]), gamma=0.5)
        q = theory.value_iteration(mdp, tol=1e-10)
        assert q[0, 0] == pytest.approx(2.0, abs=1e-10)

    def test_gamma_zero_returns_rewards(self):
        rng = np.random.default_rng(0)
        mdp = theory.random_mdp(4, 2, 0.9, rng)
        mdp0 = theory.SmallMdp(mdp.transitions, mdp.rewards, gamma=0.0)
        assert np.array_equal(theory.value_iteration(mdp0), mdp0.rewards)

    def test_fixed_point_residual(self, mdp5):
        for tol in (1e-6, 1e-10):
            q = theory.value_iteration(mdp5, tol=tol)
            assert theory.bellman_residual(mdp5, q) <= tol


class TestSimulationLemma:
    def test_zero_perturbation_zero_gap(self):
        reports = theory.simulation_lemma_check(0.0, 0.0, n_trials=3, seed=1)
        for rep in reports:
            assert rep.measured <= 1e-9
            assert rep.passed

    def test_reward_only_bound_instantiation(self):
        # eps_r = 0.1 at gamma = 0.9 bounds the gap by 0.1 / (1 - 0.9) = 1.0
        assert theory.simulation_lemma_bound(0.1, 0.0, 0.9, r_max=1.0) == pytest.approx(1.0)
        reports = theory.simulation_lemma_check(0.1, 0.0, gammas=(0.9,), n_trials=10, seed=2)
        for rep in reports:
            assert rep.measured <= 1.0 + 1e-9
            assert rep.passed

    def test_sweep_all_pass(self):
        reports = theory.simulation_lemma_check(0.1, 0.1, n_trials=30, seed=3)
        assert all(r.passed for r in reports)
        gammas = {r.instance.split("gamma=")[1] for r in reports}
        assert gammas == {"0.5", "0.9", "0.99"}

    def test_negative_perturbation_rejected(self):
        with pytest.raises(ValueError):
            theory.simulation_lemma_check(-0.1, 0.0)

    def test_perturbation_measured_within_nominal(self, mdp5, rng):
        perturbed, got_r, got_p = theory.perturb_mdp(mdp5, 0.05, 0.2, rng)
        assert got_r <= 0.05 + 1e-12
        assert got_p <= 0.2 + 1e-9
        rows = perturbed.transitions.sum(axis=2)
        assert np.allclose(rows, 1.0, atol=1e-12)


class TestMaturation:
    def test_zero_delay_exact(self):
        report = theory.maturation_curve([1.0], horizon=200, n_trials=3, seed=0)
        assert np.allclose(report.ratio_series, 1.0)
        assert report.bounds_ok
        assert report.expected_lag == 0.0

    def test_uniform_delays_hard_bounds(self):
        probs = np.zeros(15)
        probs[1:] = 1.0 / 14.0
        report = theory.maturation_curve(probs, horizon=1000, n_trials=30, seed=1)
        assert report.bounds_ok
        assert 0.986 <= report.lambda_hat <= 1.0

    def test_closed_form_expected_lag(self):
        """Mean count of unmatured arrivals equals the mean delay, 7.5."""
        probs = np.zeros(15)
        probs[1:] = 1.0 / 14.0
        assert theory.expected_unmatured(probs) == pytest.approx(7.5)
        report = theory.maturation_curve(probs, horizon=2000, n_trials=50, seed=2)
        assert report.mean_lag_tail == pytest.approx(7.5, abs=0.15)

    def test_invalid_distribution(self):
        with pytest.raises(ValueError):
            theory.maturation_curve([0.4, 0.4], horizon=10)


class TestDrMoments:
    def test_all_matured_limit(self):
        reports = theory.dr_moment_check(1.0, 1.0, 2.0, m=40.0, model_error=0.3, n_samples=150_000)
        by_name = {r.name: r for r in reports}
        assert by_name["dr-bias"].passed
        # closed form at p=1: sigma_imm^2 + sigma_delay^2, regardless of eps
        assert by_name["dr-variance"].extras["closed_form"] == pytest.approx(5.0)
        assert by_name["dr-variance"].passed

    def test_imputation_only_limit(self):
        reports = theory.dr_moment_check(0.0, 1.0, 2.0, m=40.0, model_error=0.0, n_samples=150_000)
        by_name = {r.name: r for r in reports}
        assert by_name["dr-bias"].passed
        assert by_name["dr-variance"].extras["closed_form"] == pytest.approx(1.0)
        assert by_name["dr-variance"].passed

    def test_headline_bias_cell(self):
        """p_mat 0.85 with 12% model error: bias bound 0.018 of scale."""
        reports = theory.dr_moment_check(0.85, 1.0, 1.0, m=0.0, model_error=0.12, n_samples=400_000)
        bias = next(r for r in reports if r.name == "dr-bias")
        se_part = bias.bound - (1 - 0.85) * 0.12
        assert (1 - 0.85) * 0.12 == pytest.approx(0.018)
        assert bias.passed
        assert se_part > 0

    def test_indicator_variance_closed_form(self):
        """The quoted p(1-p) m^2 term matches the fixed-weight blend."""
        reports = theory.dr_moment_check(0.5, 1.0, 1.0, m=30.0, model_error=0.0, n_samples=300_000)
        by_name = {r.name: r for r in reports}
        assert by_name["indicator-variance"].extras["closed_form"] == pytest.approx(
            1.0 + 0.5 * 1.0 + 0.25 * 900.0
        )
        assert by_name["indicator-variance"].passed
        # while the case-form target's own variance carries no m^2 term
        assert by_name["dr-variance"].extras["closed_form"] == pytest.approx(1.5)
        assert by_name["dr-variance"].passed

    def test_grid_3x3x3(self):
        passed = 0
        total = 0
        for p_mat in (0.05, 0.5, 0.85):
            for ratio in (0.5, 1.0, 2.0):
                for m in (0.0, 10.0, 50.0):
                    reports = theory.dr_moment_check(
                        p_mat, 1.0, ratio, m, model_error=0.12, n_samples=120_000
                    )
                    total += 1
                    passed += all(r.passed for r in reports)
        assert passed >= total - 1  # one MC outlier allowed

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            theory.dr_moment_check(1.4, 1.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            theory.dr_moment_check(0.5, -1.0, 1.0, 0.0)


class TestConvergenceTrace:
    def test_exact_model_converges(self):
        mdp = theory.random_mdp(3, 2, 0.5, np.random.default_rng(4))
        trace = theory.convergence_trace(mdp, c=0.0, beta=0.0, n_steps=120_000, seed=1)
        assert trace.final_error <= 0.05 * trace.v_max
        assert trace.floor_bound == float("inf")

    def test_fixed_error_floor_below_bound(self):
        mdp = theory.random_mdp(3, 2, 0.9, np.random.default_rng(4))
        trace = theory.convergence_trace(mdp, c=0.05, beta=0.0, n_steps=150_000, seed=1)
        assert trace.floor_ok
        assert trace.floor > 0

    def test_slope_ordering_and_band(self):
        mdp = theory.random_mdp(3, 2, 0.5, np.random.default_rng(0))
        fast = theory.convergence_trace(mdp, c=0.5, beta=1.0, n_steps=300_000, seed=2)
        slow = theory.convergence_trace(mdp, c=0.5, beta=0.25, n_steps=300_000, seed=2)
        assert abs(fast.slope) >= abs(slow.slope) - 0.05
        assert 0.3 <= abs(fast.slope) <= 0.7

    def test_invalid_schedule(self):
        mdp = theory.random_mdp(2, 2, 0.5, np.random.default_rng(0))
        with pytest.raises(ValueError):
            theory.convergence_trace(mdp, c=-0.1, beta=0.0, n_steps=10)


class TestExtrapolation:
    def setup_method(self):
        rng = np.random.default_rng(5)
        self.theta = rng.uniform(-0.5, 0.5, size=(3, 4))
        self.train = rng.uniform(0, 1, size=(150, 4))
        self.revenues = np.array([0.0, 10.0, -450.0, 0.0])
        self.w = rng.uniform(-1, 1, size=4)
        self.true_reward = lambda phi: float(self.w @ phi)
        self.l_r = float(np.linalg.norm(self.w))

    def test_inside_support_bounded_by_train_error(self):
        reports = theory.extrapolation_bound_check(
            self.theta, self.train, self.train[:5], self.revenues, self.true_reward, self.l_r
        )
        eps_train = reports[0].extras["eps_train"]
        for rep in reports:
            assert rep.measured <= eps_train + 1e-9
            assert rep.passed

    def test_zero_model_constant_reward(self):
        theta = np.zeros((3, 4))
        revenues = np.array([4.0, 4.0, 4.0, 4.0])
        reports = theory.extrapolation_bound_check(
            theta, self.train, self.train[:3], revenues, lambda phi: 4.0, 0.0
        )
        for rep in reports:
            assert rep.measured == pytest.approx(0.0, abs=1e-12)
            assert rep.bound == pytest.approx(0.0, abs=1e-12)

    def test_thousand_random_points_all_pass(self):
        rng = np.random.default_rng(9)
        test_points = rng.uniform(-0.5, 1.5, size=(1000, 4))
        reports = theory.extrapolation_bound_check(
            self.theta, self.train, test_points, self.revenues, self.true_reward, self.l_r
        )
        assert len(reports) == 1000
        assert all(r.passed for r in reports)


class TestSoftmaxLipschitz:
    def test_true_bounds_hold(self):
        reports = theory.softmax_lipschitz_check(n_pairs=10_000, seed=0)
        assert all(r.passed for r in reports)
        names = {r.name for r in reports}
        assert names == {"softmax-lipschitz-l1", "softmax-lipschitz-sup"}

    def test_half_sup_claim_has_counterexamples(self):
        # analytic counterexample first
        z, zp = np.zeros(3), np.array([0.0, 0.1, -0.1])
        lhs = np.abs(softmax(z) - softmax(zp)).sum()
        assert lhs > 0.5 * 0.1
        assert theory.softmax_half_sup_violation(n_pairs=5000, seed=0) > 0


class TestBoundReportIO:
    def test_pass_tolerance(self):
        assert theory.BoundReport("x", measured=1.0, bound=1.0).passed
        assert theory.BoundReport("x", measured=1.0 + 5e-10, bound=1.0).passed
        assert not theory.BoundReport("x", measured=1.1, bound=1.0).passed

    def test_jsonl_and_table(self, tmp_path):
        reports = [
            theory.BoundReport("a", 0.5, 1.0, instance="i1"),
            theory.BoundReport("b", 2.0, 1.0, instance="i2", extras={"k": 3}),
        ]
        path = tmp_path / "reports.jsonl"
        theory.write_bound_reports(path, reports)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 2
        first = json.loads(lines[0])
        assert first["passed"] is True
        second = json.loads(lines[1])
        assert second["k"] == 3 and second["passed"] is False
        table = theory.format_bound_reports(reports)
        assert "1/2 checks passed" in table
