"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Criterion 3a is a strict expected failure: the asserted 1/2
sup-norm softmax constant is mathematically false (see the companion test
for the corrected constants and the decisions record for the analysis).
"""

import time

import numpy as np
import pytest
from scipy import stats as sps

from delayq import theory
from delayq.behavior import PRICE_SCALE, reference_spec, softmax
from delayq.bench import Protocol, Scenario, WorldParams, preset_protocol, run_protocol, summarize
from delayq.dcm import fit_mle, gen_calibration_data, hessian, log_likelihood, probabilities, score
from delayq.env import EnvConfig
from delayq.learners import Adam, MlpParams, dqn_train_step, mlp_forward
from delayq.learners.mlp import td_loss_gradients
from delayq.learners.replay import TransitionRecord
from delayq.stats import cohens_d, holm_bonferroni, tost_from_summary, welch_t


def report(criterion, ok, detail, elapsed=None, budget=None):
    status = "PASS" if ok else "FAIL"
    timing = f" [{elapsed:.1f}s / budget {budget:.0f}s]" if elapsed is not None else ""
    print(f"ACCEPTANCE {criterion}: {status} - {detail}{timing}", flush=True)
    assert ok, f"criterion {criterion}: {detail}"
    if elapsed is not None and budget is not None:
        assert elapsed <= budget, f"criterion {criterion} exceeded runtime budget"


def true_agent_booking_theta(spec, demand_scale=1.0, competition_scale=1.0):
    """Reference-world booking parameters in the agent's coordinates.

    The fixed competitor price makes the relative-price term affine in the
    own price, so it folds exactly into intercept and price coefficient.
    """
    seg = spec.segments[0].booking
    alpha, b, delta, w = seg[:, 0], seg[:, 1], seg[:, 2], seg[:, 3:]
    comp = spec.comp_price / PRICE_SCALE
    intercept = demand_scale * alpha + competition_scale * delta * comp
    price_coef = -(b + competition_scale * delta)
    return np.column_stack([intercept, price_coef, w])


@pytest.fixture(scope="module")
def small_mdp():
    # gamma = 0.5: the regime where 1/n per-pair steps reach the threshold
    return theory.random_mdp(5, 3, 0.5, np.random.default_rng(7))


@pytest.fixture(scope="module")
def exact_model_trace(small_mdp):
    return theory.convergence_trace(small_mdp, c=0.0, beta=0.0, n_steps=1_000_000, seed=2)


def test_criterion_01_oracle_convergence(small_mdp, exact_model_trace):
    start = time.perf_counter()
    q_star = theory.value_iteration(small_mdp, tol=1e-8)
    trace = exact_model_trace
    threshold = 0.05 * small_mdp.v_max
    elapsed = time.perf_counter() - start
    report(
        1,
        trace.final_error <= threshold,
        f"tabular learner with exact model: error {trace.final_error:.4f} <= {threshold:.4f} "
        f"after 1e6 updates (residual vs oracle {theory.bellman_residual(small_mdp, q_star):.1e})",
        elapsed=elapsed + 16.0,  # include the fixture's trace time conservatively
        budget=120.0,
    )


def test_criterion_02_simulation_lemma():
    start = time.perf_counter()
    reports = theory.simulation_lemma_check(
        eps_r=0.1, eps_P=0.1, gammas=(0.5, 0.9, 0.99), n_trials=100, seed=3
    )
    n_pass = sum(r.passed for r in reports)
    elapsed = time.perf_counter() - start
    report(
        2,
        n_pass == 100,
        f"optimal-value gap within eps_r/(1-g) + g R eps_P/(1-g)^2 in {n_pass}/100 perturbed MDPs",
        elapsed=elapsed,
        budget=60.0,
    )


@pytest.mark.xfail(
    strict=True,
    reason=(
        "the claimed 1/2 sup-norm softmax Lipschitz constant is false: "
        "sigma((0,.1,-.1)) vs sigma((0,0,0)) moves 0.0676 > 0.05 in l1; the "
        "1/2 constant holds for the l1 norm of the utility difference and "
        "the sup-norm constant is 1"
    ),
)
def test_criterion_03a_softmax_half_sup_norm_as_stated():
    rng = np.random.default_rng(0)
    worst = -np.inf
    for _ in range(10_000):
        z1 = rng.uniform(-5, 5, size=7)
        z2 = rng.uniform(-5, 5, size=7)
        lhs = np.abs(softmax(z1) - softmax(z2)).sum()
        worst = max(worst, lhs - 0.5 * np.max(np.abs(z1 - z2)))
    assert worst <= 1e-12, f"violation {worst:.3e}"


def test_criterion_03b_softmax_lipschitz_corrected_constants():
    start = time.perf_counter()
    reports = theory.softmax_lipschitz_check(n_pairs=10_000, seed=0)
    violation = theory.softmax_half_sup_violation(n_pairs=10_000, seed=0)
    ok = all(r.passed for r in reports) and violation > 0
    elapsed = time.perf_counter() - start
    report(
        3,
        ok,
        "stated 1/2 sup-norm form FAILS as expected "
        f"(worst violation {violation:.3f}); corrected bounds (1/2 vs l1, 1 vs sup) "
        "hold with zero violations over 1e4 pairs",
        elapsed=elapsed,
        budget=60.0,
    )


def test_criterion_04_mle_correctness_and_rate():
    start = time.perf_counter()
    spec = reference_spec("mnl")
    config = EnvConfig()
    rng = np.random.default_rng(1)

    # derivative checks at the stated tolerances
    booking, _ = gen_calibration_data(spec, config, 400, seed=101)
    theta0 = rng.normal(0, 0.3, size=6 * 14)
    g = score(theta0, booking)
    h_fd = 1e-6
    for i in rng.choice(len(theta0), size=25, replace=False):
        e = np.zeros_like(theta0)
        e[i] = h_fd
        fd = (log_likelihood(theta0 + e, booking) - log_likelihood(theta0 - e, booking)) / (2 * h_fd)
        assert abs(g[i] - fd) <= 1e-5 * max(1.0, abs(fd))
    hess = hessian(theta0, booking)
    h_fd = 1e-5
    for i in rng.choice(len(theta0), size=8, replace=False):
        e = np.zeros_like(theta0)
        e[i] = h_fd
        fd_row = (score(theta0 + e, booking) - score(theta0 - e, booking)) / (2 * h_fd)
        err = np.abs(hess[i] - fd_row) / np.maximum(1.0, np.abs(fd_row))
        assert err.max() <= 1e-4

    # N^{-1/2} recovery rate: error(4N)/error(N) with N = 12,500
    theta_true = true_agent_booking_theta(spec)
    ratios = []
    for rep in range(20):
        big, _ = gen_calibration_data(spec, config, 50_000, seed=1000 + rep)
        small = big.subset(slice(0, 12_500))
        theta_small, _ = fit_mle(small)
        theta_big, _ = fit_mle(big, init=theta_small)
        e_small = np.linalg.norm(theta_small - theta_true)
        e_big = np.linalg.norm(theta_big - theta_true)
        ratios.append(e_big / e_small)
    median_ratio = float(np.median(ratios))
    elapsed = time.perf_counter() - start
    report(
        4,
        0.3 <= median_ratio <= 0.8,
        f"derivatives match finite differences; recovery error(4N)/error(N) median "
        f"{median_ratio:.3f} in [0.3, 0.8] over 20 replications",
        elapsed=elapsed,
        budget=300.0,
    )


def test_criterion_05_maturation_lemma():
    start = time.perf_counter()
    probs = np.zeros(15)
    probs[1:] = 1.0 / 14.0
    result = theory.maturation_curve(probs, horizon=1000, n_trials=100, seed=5)
    elapsed = time.perf_counter() - start
    report(
        5,
        result.bounds_ok,
        f"t - 14 <= N_t <= t for all t <= 1000 in 100 trials; N_T/T = {result.lambda_hat:.4f}, "
        f"tail lag {result.mean_lag_tail:.2f} vs closed form {result.expected_lag:.2f}",
        elapsed=elapsed,
        budget=60.0,
    )


def test_criterion_06_dr_moments_grid():
    start = time.perf_counter()
    cells = 0
    cells_pass = 0
    headline = None
    for p_mat in (0.05, 0.5, 0.85):
        for ratio in (0.5, 1.0, 2.0):
            for m in (0.0, 10.0, 50.0):
                reports = theory.dr_moment_check(
                    p_mat, 1.0, ratio, m, model_error=0.12, n_samples=250_000, seed=6
                )
                cells += 1
                cells_pass += all(r.passed for r in reports)
                if p_mat == 0.85 and m == 0.0 and ratio == 1.0:
                    headline = next(r for r in reports if r.name == "dr-bias")
    assert headline is not None
    bias_bound_exact = (1 - 0.85) * 0.12
    elapsed = time.perf_counter() - start
    report(
        6,
        cells_pass >= 26 and headline.passed and abs(bias_bound_exact - 0.018) < 1e-12,
        f"{cells_pass}/27 grid cells pass (bias, DR variance, indicator-variance closed form); "
        f"headline cell p_mat=0.85 eps=0.12: bias {headline.measured:.5f} <= 0.018 + 3 MC-se",
        elapsed=elapsed,
        budget=120.0,
    )


@pytest.fixture(scope="module")
def stationary_results():
    protocol = preset_protocol(
        "stationary",
        n_seeds=20,
        episodes=82,
        eval_episodes=50,
        calibration_obs=20_000,
        base_seed=42,
    )
    records = run_protocol(protocol)
    return protocol, records


def test_criterion_07_stationary_equivalence(stationary_results):
    start = time.perf_counter()
    protocol, records = stationary_results
    stats = summarize(records, protocol, with_tost=True)
    row = stats.rows[0]
    ok = row.p_raw > 0.05 and abs(row.relative_difference) <= 0.05
    elapsed = time.perf_counter() - start
    report(
        7,
        ok,
        f"stationary tabular means mb={row.means['mb']:.0f} ca={row.means['ca']:.0f}, "
        f"Welch p={row.p_raw:.3f} > 0.05, |rel diff|={abs(row.relative_difference):.3%} <= 5% "
        f"(d={row.cohens_d:.2f}, TOST p={row.tost.p:.3f})",
        elapsed=elapsed + 200.0,  # fixture runtime charged conservatively
        budget=900.0,
    )


def test_criterion_08_misspecification_direction():
    start = time.perf_counter()
    world = WorldParams(family="nested_logit")
    protocol = Protocol(
        name="oof-nested",
        scenarios=(Scenario("nested_logit", world, world),),
        methods=("mb", "ca"),
        n_seeds=20,
        episodes=82,
        eval_episodes=50,
        calibration_obs=20_000,
        base_seed=42,
    )
    records = run_protocol(protocol)
    mb = [r.eval_mean for r in records if r.method == "mb"]
    ca = [r.eval_mean for r in records if r.method == "ca"]
    pooled_se = float(np.sqrt(np.var(mb, ddof=1) / len(mb) + np.var(ca, ddof=1) / len(ca)))
    ok = np.mean(ca) <= np.mean(mb) + 0.5 * pooled_se
    elapsed = time.perf_counter() - start
    report(
        8,
        ok,
        f"nested-logit truth with MNL-fitted model: ca mean {np.mean(ca):.0f} <= "
        f"mb mean {np.mean(mb):.0f} + 0.5 se ({0.5 * pooled_se:.0f}) over 20 seeds "
        "(directional non-superiority)",
        elapsed=elapsed,
        budget=1200.0,
    )


def test_criterion_09_dqn_sanity():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    params = MlpParams.init(3, (4, 4), 2, rng)
    target = params.copy()
    batch = {
        "s": rng.normal(size=(3, 3)),
        "a": np.array([0, 1, 0]),
        "r": np.array([1.0, -0.5, 2.0]),
        "s_next": rng.normal(size=(3, 3)),
        "terminal": np.array([False, False, True]),
    }
    _, grads_w, grads_b = td_loss_gradients(params, target, batch, gamma=0.9)
    h = 1e-6
    worst_rel = 0.0
    for layer in range(len(params.weights)):
        for arr, grads in ((params.weights, grads_w), (params.biases, grads_b)):
            for idx in [tuple(i) for i in np.ndindex(arr[layer].shape)]:
                orig = arr[layer][idx]
                arr[layer][idx] = orig + h
                up, _, _ = td_loss_gradients(params, target, batch, gamma=0.9)
                arr[layer][idx] = orig - h
                down, _, _ = td_loss_gradients(params, target, batch, gamma=0.9)
                arr[layer][idx] = orig
                fd = (up - down) / (2 * h)
                worst_rel = max(worst_rel, abs(grads[layer][idx] - fd) / max(1.0, abs(fd)))
    grads_ok = worst_rel <= 1e-3

    # zero-lr no-op
    snapshot = params.copy()
    encode = lambda s: np.array([1.0, float(s), 0.5])
    rec = TransitionRecord(s=0, a=1, reward_target=5.0, s_next=1, provenance="imputed")
    dqn_train_step(params, params.copy(), [rec], 0.9, Adam(params), encode, lr=0.0)
    noop_ok = all(
        np.array_equal(a, b) for a, b in zip(snapshot.weights, params.weights)
    )

    # single-transition regression
    params2 = MlpParams.init(3, (8, 8), 2, np.random.default_rng(9))
    adam = Adam(params2)
    for _ in range(10_000):
        dqn_train_step(params2, params2, [rec], 0.0, adam, encode, lr=1e-3)
        if abs(mlp_forward(params2, encode(0))[1] - 5.0) <= 0.01:
            break
    regression_ok = abs(mlp_forward(params2, encode(0))[1] - 5.0) <= 0.01
    elapsed = time.perf_counter() - start
    report(
        9,
        grads_ok and noop_ok and regression_ok,
        f"backprop vs finite differences worst rel err {worst_rel:.2e} <= 1e-3; "
        "zero-lr step is a no-op; single-transition regression within 0.01",
        elapsed=elapsed,
        budget=60.0,
    )


def test_criterion_10_statistics_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(100):
        a = rng.normal(0, 1 + rng.random(), size=int(rng.integers(3, 40)))
        b = rng.normal(rng.random(), 1 + rng.random(), size=int(rng.integers(3, 40)))
        res = welch_t(a, b)
        ref = sps.ttest_ind(a, b, equal_var=False)
        worst = max(worst, abs(res.t - ref.statistic), abs(res.p - ref.pvalue))
        na, nb = len(a), len(b)
        pooled = np.sqrt(((na - 1) * np.var(a, ddof=1) + (nb - 1) * np.var(b, ddof=1)) / (na + nb - 2))
        worst = max(worst, abs(cohens_d(a, b) - (np.mean(a) - np.mean(b)) / pooled))
    welch_ok = worst <= 1e-10

    reject, adjusted = holm_bonferroni([0.001, 0.02, 0.03, 0.04], 0.05)
    holm_ok = reject.tolist() == [True, False, False, False] and np.allclose(
        adjusted, [0.004, 0.06, 0.06, 0.06]
    )
    reject2, _ = holm_bonferroni([0.001, 0.012, 0.03, 0.04], 0.05)
    holm_ok = holm_ok and reject2.tolist() == [True, True, False, False]

    res = tost_from_summary(mean_diff=182.0, se=796.0, df=18.0, margin=404.0, alpha=0.05)
    tost_ok = abs(res.p - 0.39) <= 0.02
    elapsed = time.perf_counter() - start
    report(
        10,
        welch_ok and holm_ok and tost_ok,
        f"welch/cohens-d match reference within {worst:.1e} (<=1e-10) on 100 pairs; "
        f"Holm step-down matches the hand-executed cases; TOST summary mode p={res.p:.3f} (0.39 +/- 0.02)",
        elapsed=elapsed,
        budget=60.0,
    )


def test_criterion_11_fixed_model_error_floor(small_mdp, exact_model_trace):
    start = time.perf_counter()
    c = 0.05
    trace = theory.convergence_trace(small_mdp, c=c, beta=0.0, n_steps=1_000_000, seed=2)
    threshold = 0.05 * small_mdp.v_max
    clean_ok = exact_model_trace.floor <= threshold
    elapsed = time.perf_counter() - start
    report(
        11,
        trace.floor_ok and clean_ok,
        f"persistent model error c={c}: floor {trace.floor:.4f} <= corollary bound "
        f"{trace.floor_bound:.4f}; with c=0 the floor {exact_model_trace.floor:.4f} stays "
        f"below the criterion-1 threshold {threshold:.4f}",
        elapsed=elapsed,
        budget=300.0,
    )
