"""Oracle-based verification of the quantitative claims at desk scale.

Each check builds its own independent oracle (value iteration, closed-form
expectations, Monte Carlo with explicit standard errors) and emits
BoundReports comparing a measured quantity against a theoretical bound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .learners.tabular import QTable, epsilon_greedy, tabular_q_update
from .seeding import derive_seed

BOUND_TOL = 1e-9


@dataclass
class SmallMdp:
    """Dense tabular MDP with row-stochastic transitions and bounded rewards."""

    transitions: np.ndarray  # (S, A, S)
    rewards: np.ndarray  # (S, A)
    gamma: float

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=float)
        self.rewards = np.asarray(self.rewards, dtype=float)
        if self.transitions.ndim != 3 or self.rewards.ndim != 2:
            raise ValueError("transitions must be (S, A, S) and rewards (S, A)")
        s, a, s2 = self.transitions.shape
        if s != s2 or self.rewards.shape != (s, a):
            raise ValueError("transition and reward shapes disagree")
        row_sums = self.transitions.sum(axis=2)
        if np.any(np.abs(row_sums - 1.0) > 1e-12) or np.any(self.transitions < -1e-15):
            raise ValueError("transition rows must sum to 1")
        if not (0.0 < self.gamma < 1.0) and self.gamma != 0.0:
            raise ValueError("gamma must lie in [0, 1)")
        if np.any(self.rewards < 0.0):
            raise ValueError("rewards must be nonnegative")

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]

    @property
    def r_max(self) -> float:
        return float(self.rewards.max())

    @property
    def v_max(self) -> float:
        return self.r_max / (1.0 - self.gamma)

    def sample_next(self, s: int, a: int, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_states, p=self.transitions[s, a]))


def random_mdp(
    n_states: int,
    n_actions: int,
    gamma: float,
    rng: np.random.Generator,
    r_max: float = 1.0,
    min_prob: float = 0.05,
) -> SmallMdp:
    """Random dense MDP whose transition entries stay above ``min_prob``."""
    raw = rng.random((n_states, n_actions, n_states)) + min_prob * n_states
    transitions = raw / raw.sum(axis=2, keepdims=True)
    rewards = rng.random((n_states, n_actions)) * r_max
    return SmallMdp(transitions=transitions, rewards=rewards, gamma=gamma)


def bellman_operator(mdp: SmallMdp, q: np.ndarray) -> np.ndarray:
    return mdp.rewards + mdp.gamma * mdp.transitions @ q.max(axis=1)


def value_iteration(mdp: SmallMdp, tol: float = 1e-8, max_iter: int = 10_000_000) -> np.ndarray:
    """Iterate the Bellman operator to a guaranteed sup-error of ``tol``.

    Stops when successive iterates differ by at most tol (1 - gamma) /
    (2 gamma), which bounds the distance to the fixed point by tol / 2.
    """
    q = np.zeros((mdp.n_states, mdp.n_actions))
    if mdp.gamma == 0.0:
        return mdp.rewards.copy()
    threshold = tol * (1.0 - mdp.gamma) / (2.0 * mdp.gamma)
    for _ in range(max_iter):
        q_next = bellman_operator(mdp, q)
        delta = float(np.max(np.abs(q_next - q)))
        q = q_next
        if delta <= threshold:
            return q
    raise RuntimeError("value iteration failed to converge")


def bellman_residual(mdp: SmallMdp, q: np.ndarray) -> float:
    return float(np.max(np.abs(bellman_operator(mdp, q) - q)))


@dataclass
class BoundReport:
    """Measured quantity against a theoretical bound."""

    name: str
    measured: float
    bound: float
    instance: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.measured <= self.bound + BOUND_TOL

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "measured": self.measured,
            "bound": self.bound,
            "passed": self.passed,
            "instance": self.instance,
            **self.extras,
        }


def write_bound_reports(path, reports) -> None:
    """Emit one JSON object per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for rep in reports:
            fh.write(json.dumps(rep.to_dict(), sort_keys=True) + "\n")


def format_bound_reports(reports) -> str:
    lines = [f"{'name':<28} {'measured':>14} {'bound':>14} status"]
    for rep in reports:
        lines.append(
            f"{rep.name:<28} {rep.measured:>14.6g} {rep.bound:>14.6g} "
            f"{'pass' if rep.passed else 'FAIL'}  {rep.instance}"
        )
    n_pass = sum(r.passed for r in reports)
    lines.append(f"{n_pass}/{len(reports)} checks passed")
    return "\n".join(lines)


def perturb_mdp(
    mdp: SmallMdp, eps_r: float, eps_P: float, rng: np.random.Generator
) -> tuple[SmallMdp, float, float]:
    """Perturbed copy with measured sup reward and L1 transition discrepancy.

    Transition rows are perturbed by a centered draw scaled to L1 norm
    eps_P, then negative mass is clipped and rows renormalized
    (proportional redistribution); the realized discrepancy is measured
    after projection so bounds always use the actual perturbation.
    """
    rewards = mdp.rewards + eps_r * rng.uniform(-1.0, 1.0, size=mdp.rewards.shape)
    rewards = np.clip(rewards, 0.0, mdp.r_max)
    transitions = mdp.transitions.copy()
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            if eps_P <= 0:
                continue
            delta = rng.uniform(-1.0, 1.0, size=mdp.n_states)
            delta -= delta.mean()
            norm = np.abs(delta).sum()
            if norm > 0:
                delta *= eps_P / norm
            row = np.clip(transitions[s, a] + delta, 0.0, None)
            transitions[s, a] = row / row.sum()
    perturbed = SmallMdp(transitions=transitions, rewards=rewards, gamma=mdp.gamma)
    measured_r = float(np.max(np.abs(rewards - mdp.rewards)))
    measured_p = float(np.max(np.abs(transitions - mdp.transitions).sum(axis=2)))
    return perturbed, measured_r, measured_p


def simulation_lemma_bound(eps_r: float, eps_P: float, gamma: float, r_max: float) -> float:
    return eps_r / (1.0 - gamma) + gamma * r_max * eps_P / (1.0 - gamma) ** 2


def simulation_lemma_check(
    eps_r: float,
    eps_P: float,
    gammas=(0.5, 0.9, 0.99),
    n_trials: int = 100,
    n_states: int = 5,
    n_actions: int = 3,
    seed: int = 0,
    vi_tol: float = 1e-10,
) -> list:
    """Optimal-value gap of perturbed MDPs against the simulation-lemma bound."""
    if eps_r < 0 or eps_P < 0:
        raise ValueError("perturbation magnitudes must be nonnegative")
    reports = []
    for trial in range(n_trials):
        rng = np.random.default_rng(derive_seed(seed, "simlemma", trial))
        gamma = gammas[trial % len(gammas)]
        mdp = random_mdp(n_states, n_actions, gamma, rng)
        perturbed, got_r, got_p = perturb_mdp(mdp, eps_r, eps_P, rng)
        q_true = value_iteration(mdp, tol=vi_tol)
        q_pert = value_iteration(perturbed, tol=vi_tol)
        gap = float(np.max(np.abs(q_pert - q_true)))
        bound = simulation_lemma_bound(got_r, got_p, gamma, mdp.r_max) + vi_tol
        reports.append(
            BoundReport(
                name="simulation-lemma",
                measured=gap,
                bound=bound,
                instance=f"trial={trial} gamma={gamma}",
                extras={"eps_r": got_r, "eps_P": got_p},
            )
        )
    return reports


@dataclass
class MaturationReport:
    horizon: int
    n_trials: int
    ratio_series: np.ndarray
    lambda_hat: float
    mean_lag_tail: float
    expected_lag: float
    bound_reports: list

    @property
    def bounds_ok(self) -> bool:
        return all(r.passed for r in self.bound_reports)


def expected_unmatured(delay_probs: np.ndarray) -> float:
    """Closed-form mean count of not-yet-matured recent arrivals.

    Equals the sum over k >= 0 of P(D > k), i.e. the mean delay.
    """
    delay_probs = np.asarray(delay_probs, dtype=float)
    cdf = np.cumsum(delay_probs)
    return float(np.sum(1.0 - cdf[:-1])) if len(cdf) > 1 else 0.0


def maturation_curve(
    delay_probs,
    horizon: int,
    n_trials: int = 100,
    arrival_rate: float = 1.0,
    seed: int = 0,
    tail_fraction: float = 0.2,
) -> MaturationReport:
    """Simulate arrival maturation and check the hard count bounds.

    ``delay_probs[k]`` is the probability of a k-period delay. With one
    arrival per period the matured count N_t obeys
    t - D_max <= N_t <= t for every t.
    """
    delay_probs = np.asarray(delay_probs, dtype=float)
    if abs(delay_probs.sum() - 1.0) > 1e-9 or np.any(delay_probs < 0):
        raise ValueError("delay_probs must be a probability vector")
    d_max = len(delay_probs) - 1
    t_axis = np.arange(1, horizon + 1)
    ratios = np.zeros(horizon)
    lag_tail_values = []
    worst_lower = np.inf  # min over trials/t of N_t - (t - D_max)
    worst_upper = -np.inf  # max over trials/t of N_t - t
    tail_start = int(horizon * (1.0 - tail_fraction))
    for trial in range(n_trials):
        rng = np.random.default_rng(derive_seed(seed, "maturation", trial))
        arrivals = (
            np.ones(horizon, dtype=bool)
            if arrival_rate >= 1.0
            else rng.random(horizon) < arrival_rate
        )
        delays = rng.choice(len(delay_probs), size=horizon, p=delay_probs)
        maturity = np.where(arrivals, np.arange(1, horizon + 1) + delays, np.iinfo(np.int64).max)
        n_t = np.cumsum(np.bincount(np.clip(maturity, 0, horizon + 1), minlength=horizon + 2))[1 : horizon + 1]
        ratios += n_t / t_axis
        lag_tail_values.append(np.mean((t_axis - n_t)[tail_start:]))
        if arrival_rate >= 1.0:
            worst_lower = min(worst_lower, float(np.min(n_t - (t_axis - d_max))))
            worst_upper = max(worst_upper, float(np.max(n_t - t_axis)))
    ratios /= n_trials
    reports = []
    if arrival_rate >= 1.0:
        reports.append(
            BoundReport(
                name="maturation-lower",
                measured=-worst_lower,  # passes iff N_t >= t - D_max everywhere
                bound=0.0,
                instance=f"horizon={horizon} trials={n_trials} d_max={d_max}",
            )
        )
        reports.append(
            BoundReport(
                name="maturation-upper",
                measured=worst_upper,
                bound=0.0,
                instance=f"horizon={horizon} trials={n_trials}",
            )
        )
    return MaturationReport(
        horizon=horizon,
        n_trials=n_trials,
        ratio_series=ratios,
        lambda_hat=float(ratios[-1]),
        mean_lag_tail=float(np.mean(lag_tail_values)),
        expected_lag=expected_unmatured(delay_probs) * arrival_rate,
        bound_reports=reports,
    )


def dr_moment_check(
    p_mat: float,
    sigma_imm: float,
    sigma_delay: float,
    m: float,
    model_error: float = 0.0,
    n_samples: int = 200_000,
    seed: int = 0,
    mu_imm: float = 0.0,
) -> list:
    """Monte-Carlo check of the doubly-robust moment formulas.

    Draws (r_imm, r_del, matured) mutually independent with E[r_del] = m
    and a model prediction off by ``model_error``. Verifies, each within
    three Monte-Carlo standard errors:

    - bias of the case-form target r_imm + m_hat + 1{mat}(r_del - m_hat)
      against the (1 - p_mat) |model_error| bound;
    - its variance against sigma_imm^2 + p sigma_delay^2 +
      p (1 - p) model_error^2;
    - the variance of the fixed-weight blend r_imm + (1 - p) m_hat +
      1{mat} r_del against sigma_imm^2 + p sigma_delay^2 + p (1 - p) m^2,
      the closed form quoted for the maturation-indicator variance term.
    """
    if not (0.0 <= p_mat <= 1.0):
        raise ValueError("p_mat must lie in [0, 1]")
    if sigma_imm < 0 or sigma_delay < 0:
        raise ValueError("standard deviations must be nonnegative")
    rng = np.random.default_rng(derive_seed(seed, "dr", p_mat, sigma_imm, sigma_delay, m, model_error))
    r_imm = mu_imm + sigma_imm * rng.standard_normal(n_samples)
    r_del = m + sigma_delay * rng.standard_normal(n_samples)
    matured = rng.random(n_samples) < p_mat
    m_hat = m + model_error

    target = r_imm + m_hat + matured * (r_del - m_hat)
    true_mean = mu_imm + m
    bias = abs(float(target.mean()) - true_mean)
    se_mean = float(target.std(ddof=1)) / np.sqrt(n_samples)
    instance = f"p_mat={p_mat} sd_ratio={sigma_delay}/{sigma_imm} m={m} eps={model_error}"
    reports = [
        BoundReport(
            name="dr-bias",
            measured=bias,
            bound=(1.0 - p_mat) * abs(model_error) + 3.0 * se_mean,
            instance=instance,
        )
    ]

    def variance_report(name, samples, closed_form):
        emp = float(samples.var(ddof=1))
        centered = samples - samples.mean()
        m2 = float(np.mean(centered**2))
        m4 = float(np.mean(centered**4))
        se_var = np.sqrt(max(m4 - m2**2, 0.0) / n_samples)
        return BoundReport(
            name=name,
            measured=abs(emp - closed_form),
            bound=3.0 * se_var,
            instance=instance,
            extras={"empirical": emp, "closed_form": closed_form},
        )

    var_dr = sigma_imm**2 + p_mat * sigma_delay**2 + p_mat * (1.0 - p_mat) * model_error**2
    reports.append(variance_report("dr-variance", target, var_dr))

    blend = r_imm + (1.0 - p_mat) * m_hat + matured * r_del
    var_blend = sigma_imm**2 + p_mat * sigma_delay**2 + p_mat * (1.0 - p_mat) * m**2
    reports.append(variance_report("indicator-variance", blend, var_blend))
    return reports


@dataclass
class TraceReport:
    grid: np.ndarray
    errors: np.ndarray
    slope: float
    floor: float
    floor_bound: float
    final_error: float
    v_max: float

    @property
    def floor_ok(self) -> bool:
        return self.floor <= self.floor_bound + BOUND_TOL


def _perturbation_patterns(mdp: SmallMdp, rng: np.random.Generator):
    reward_dir = rng.choice([-1.0, 1.0], size=mdp.rewards.shape)
    donors = mdp.transitions.argmax(axis=2)
    recipients = mdp.transitions.argmin(axis=2)
    return reward_dir, donors, recipients


def convergence_trace(
    mdp: SmallMdp,
    c: float,
    beta: float,
    n_steps: int,
    seed: int = 0,
    epsilon: float = 0.3,
    n_grid: int = 60,
    floor_window: int = 8,
) -> TraceReport:
    """Tabular Q-learning against a drifting model with error c * t^-beta.

    Every sampled reward and transition is perturbed within eps_t toward a
    fixed pattern, so a beta of zero leaves a persistent model gap whose
    error floor must stay below the fixed-model corollary bound. Errors
    against the value-iteration oracle are logged on a geometric grid and
    the log-log slope is fitted over the final decade.
    """
    if beta < 0 or c < 0:
        raise ValueError("c and beta must be nonnegative")
    rng = np.random.default_rng(derive_seed(seed, "trace", c, beta))
    q_star = value_iteration(mdp, tol=1e-10)
    reward_dir, donors, recipients = _perturbation_patterns(mdp, rng)
    table = QTable.zeros(mdp.n_states, mdp.n_actions)
    grid = np.unique(
        np.geomspace(10, n_steps, num=n_grid).astype(np.int64)
    )
    errors = np.zeros(len(grid))
    grid_idx = 0
    s = 0
    base_cdfs = np.cumsum(mdp.transitions, axis=2)
    for t in range(1, n_steps + 1):
        eps_t = c if beta == 0.0 else c * t ** (-beta)
        a = epsilon_greedy(table.values[s], epsilon, rng)
        if eps_t > 0:
            reward = float(np.clip(mdp.rewards[s, a] + eps_t * reward_dir[s, a], 0.0, mdp.r_max))
            row = mdp.transitions[s, a].copy()
            shift = min(eps_t / 2.0, row[donors[s, a]])
            row[donors[s, a]] -= shift
            row[recipients[s, a]] += shift
            cdf = np.cumsum(row)
        else:
            reward = float(mdp.rewards[s, a])
            cdf = base_cdfs[s, a]
        s_next = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right").clip(0, mdp.n_states - 1))
        tabular_q_update(table, s, a, reward, s_next, mdp.gamma)
        s = s_next
        if grid_idx < len(grid) and t == grid[grid_idx]:
            errors[grid_idx] = float(np.max(np.abs(table.values - q_star)))
            grid_idx += 1
    # Log-log slope over the final decade of the grid.
    mask = grid >= grid[-1] / 10
    x = np.log(grid[mask].astype(float))
    y = np.log(np.maximum(errors[mask], 1e-300))
    slope = float(np.polyfit(x, y, 1)[0])
    floor = float(np.median(errors[-floor_window:]))
    floor_bound = simulation_lemma_bound(c, c, mdp.gamma, mdp.r_max) if c > 0 else float("inf")
    return TraceReport(
        grid=grid,
        errors=errors,
        slope=slope,
        floor=floor,
        floor_bound=floor_bound,
        final_error=float(errors[-1]),
        v_max=mdp.v_max,
    )


def softmax_lipschitz_check(n_pairs: int = 10_000, dim: int = 7, scale: float = 5.0, seed: int = 0) -> list:
    """Random utility pairs against the softmax Lipschitz bounds.

    Two true inequalities are checked on every pair: the l1-to-l1 bound
    with constant 1/2 (the per-column Jacobian sum is 2 p (1 - p) <= 1/2)
    and the sup-to-l1 bound with constant 1 (the exact operator norm is
    4 a (1 - a) <= 1 over sign vectors with positive-part mass a). The
    often-quoted 1/2 constant does NOT hold against the sup norm; see
    :func:`softmax_half_sup_violation` for its worst observed violation.
    """
    from .behavior import softmax

    rng = np.random.default_rng(derive_seed(seed, "lipschitz"))
    worst_l1 = -np.inf
    worst_sup = -np.inf
    for _ in range(n_pairs):
        z1 = rng.uniform(-scale, scale, size=dim)
        z2 = rng.uniform(-scale, scale, size=dim)
        lhs = np.abs(softmax(z1) - softmax(z2)).sum()
        worst_l1 = max(worst_l1, lhs - 0.5 * np.abs(z1 - z2).sum())
        worst_sup = max(worst_sup, lhs - np.max(np.abs(z1 - z2)))
    instance = f"pairs={n_pairs} dim={dim}"
    return [
        BoundReport(
            name="softmax-lipschitz-l1", measured=float(worst_l1), bound=0.0, instance=instance
        ),
        BoundReport(
            name="softmax-lipschitz-sup", measured=float(worst_sup), bound=0.0, instance=instance
        ),
    ]


def softmax_half_sup_violation(n_pairs: int = 10_000, dim: int = 7, scale: float = 5.0, seed: int = 0) -> float:
    """Worst violation of the (false) 1/2 sup-norm softmax Lipschitz claim.

    Positive values certify counterexamples, e.g. z = 0, z' = (0, h, -h)
    gives an l1 probability change of about (2/3) h against a claimed
    bound of h / 2.
    """
    from .behavior import softmax

    rng = np.random.default_rng(derive_seed(seed, "lipschitz"))
    worst = -np.inf
    for _ in range(n_pairs):
        z1 = rng.uniform(-scale, scale, size=dim)
        z2 = rng.uniform(-scale, scale, size=dim)
        lhs = np.abs(softmax(z1) - softmax(z2)).sum()
        worst = max(worst, lhs - 0.5 * np.max(np.abs(z1 - z2)))
    return float(worst)


def extrapolation_bound_check(
    theta: np.ndarray,
    train_features: np.ndarray,
    test_features: np.ndarray,
    revenues: np.ndarray,
    true_reward,
    lipschitz_true: float,
) -> list:
    """Pointwise extrapolation bound for the model-expected reward.

    theta rows are per-outcome utility weights (a zero baseline row is
    implied); the model reward is the softmax-weighted revenue. The bound
    is eps_train + (L_m + L_r) * delta_phi with L_m = B_theta * R_max.
    """
    from .behavior import softmax

    theta = np.asarray(theta, dtype=float)
    revenues = np.asarray(revenues, dtype=float)
    train_features = np.atleast_2d(train_features)
    test_features = np.atleast_2d(test_features)

    def model_reward(phi):
        utils = np.concatenate([[0.0], theta @ phi])
        return float(softmax(utils) @ revenues)

    b_theta = float(np.max(np.linalg.norm(theta, axis=1))) if theta.size else 0.0
    l_m = b_theta * float(np.max(np.abs(revenues)))
    eps_train = max(abs(model_reward(phi) - true_reward(phi)) for phi in train_features)
    reports = []
    for i, phi in enumerate(test_features):
        delta = float(np.min(np.linalg.norm(train_features - phi, axis=1)))
        err = abs(model_reward(phi) - true_reward(phi))
        reports.append(
            BoundReport(
                name="extrapolation",
                measured=err,
                bound=eps_train + (l_m + lipschitz_true) * delta,
                instance=f"test_point={i} delta_phi={delta:.4f}",
                extras={"eps_train": eps_train, "l_m": l_m},
            )
        )
    return reports
