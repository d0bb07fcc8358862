"""Agent-side multinomial logit: likelihood, analytic derivatives, Newton MLE.

The estimator follows the scikit-learn protocol (``fit`` / ``predict_proba``
/ ``get_params``) so it composes with the wider ecosystem, while the
module-level functions expose the raw likelihood machinery for oracle
tests and the theory suites.

Parameter layout: one row per non-baseline alternative, columns
``(intercept, price_coef, w_1..w_d)``; the baseline (outside option /
keep) is pinned at utility zero, so the parameter count is
``(J - 1) * (d + 2)``. Prices enter utilities divided by
:data:`~delayq.behavior.PRICE_SCALE`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .behavior import PRICE_SCALE, SHOCK_OUTCOMES, BehaviorSpec, choice_probabilities, sample_outcome, shock_probabilities
from .env import EnvConfig, MODIFY_BAND, Order, expected_shock_revenues, sample_customer_features, shock_revenue

BOX_BOUND = 10.0
PROB_FLOOR = 0.001  # epsilon_0 reported by the bounded-probability audit


class IdentifiabilityError(ValueError):
    """Raised when an identifiability precondition fails before fitting."""

    def __init__(self, condition: str, detail: str):
        super().__init__(f"{condition}: {detail}")
        self.condition = condition
        self.detail = detail


@dataclass
class ChoiceDataset:
    """Observations for one MNL block.

    ``prices`` holds the per-alternative price regressor in dollars, one
    column per non-baseline alternative (for the shock block the booked
    price is repeated across columns). ``chosen`` indexes alternatives
    with 0 = baseline.
    """

    prices: np.ndarray
    features: np.ndarray
    chosen: np.ndarray

    def __post_init__(self):
        self.prices = np.atleast_2d(np.asarray(self.prices, dtype=float))
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.chosen = np.asarray(self.chosen, dtype=int)
        if len(self.prices) != len(self.features) or len(self.prices) != len(self.chosen):
            raise ValueError("prices, features and chosen must have equal length")
        if self.n and (self.chosen.min() < 0 or self.chosen.max() > self.prices.shape[1]):
            raise ValueError("chosen indices out of range")

    @property
    def n(self) -> int:
        return len(self.chosen)

    @property
    def n_alternatives(self) -> int:
        """Number of alternatives including the baseline."""
        return self.prices.shape[1] + 1

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def counts(self) -> np.ndarray:
        return np.bincount(self.chosen, minlength=self.n_alternatives)

    def subset(self, idx) -> "ChoiceDataset":
        return ChoiceDataset(self.prices[idx], self.features[idx], self.chosen[idx])


@dataclass
class FitReport:
    final_log_likelihood: float
    iterations: int
    grad_norm: float
    hessian_condition: float
    converged: bool
    hit_bound: bool = False
    used_gradient_fallback: bool = False


def _as_matrix(theta, data: ChoiceDataset) -> np.ndarray:
    """Accept a flat parameter vector or the (J-1, d+2) matrix."""
    theta = np.asarray(theta, dtype=float)
    k, m = data.prices.shape[1], data.feature_dim + 2
    if theta.ndim == 1:
        if theta.size != k * m:
            raise ValueError(f"theta has {theta.size} entries, expected {k * m}")
        return theta.reshape(k, m)
    if theta.shape != (k, m):
        raise ValueError(f"theta shape {theta.shape} does not match data ({k}, {m})")
    return theta


def utilities(theta, data: ChoiceDataset) -> np.ndarray:
    """Systematic utilities of the non-baseline alternatives, shape (N, J-1)."""
    th = _as_matrix(theta, data)
    return th[:, 0] + (data.prices / PRICE_SCALE) * th[:, 1] + data.features @ th[:, 2:].T


def probabilities(theta, data: ChoiceDataset) -> np.ndarray:
    """Choice probabilities including the baseline column, shape (N, J)."""
    u = utilities(theta, data)
    full = np.concatenate([np.zeros((data.n, 1)), u], axis=1)
    full -= full.max(axis=1, keepdims=True)
    e = np.exp(full)
    return e / e.sum(axis=1, keepdims=True)


def log_likelihood(theta, data: ChoiceDataset) -> float:
    """Exact sum of log choice probabilities (max-subtraction stabilized)."""
    if data.n == 0:
        return 0.0
    u = utilities(theta, data)
    full = np.concatenate([np.zeros((data.n, 1)), u], axis=1)
    m = full.max(axis=1)
    lse = m + np.log(np.exp(full - m[:, None]).sum(axis=1))
    return float(np.sum(full[np.arange(data.n), data.chosen] - lse))


def _alt_design(data: ChoiceDataset, j: int) -> np.ndarray:
    """Per-alternative regressor matrix (1, price_j, x), shape (N, d+2)."""
    return np.concatenate(
        [np.ones((data.n, 1)), data.prices[:, [j]] / PRICE_SCALE, data.features], axis=1
    )


def score(theta, data: ChoiceDataset) -> np.ndarray:
    """Gradient of the log-likelihood as a flat vector in block layout.

    Per observation the gradient is the chosen alternative's regressor
    minus its probability-weighted average, which reduces blockwise to
    (indicator - probability) times the regressor.
    """
    th = _as_matrix(theta, data)
    k, m = th.shape
    if data.n == 0:
        return np.zeros(k * m)
    p = probabilities(theta, data)
    onehot = np.zeros((data.n, k + 1))
    onehot[np.arange(data.n), data.chosen] = 1.0
    resid = onehot[:, 1:] - p[:, 1:]
    g = np.empty((k, m))
    for j in range(k):
        g[j] = _alt_design(data, j).T @ resid[:, j]
    return g.ravel()


def hessian(theta, data: ChoiceDataset) -> np.ndarray:
    """Analytic Hessian with the blockwise -[diag(p) - p p^T] (x) x x^T form."""
    th = _as_matrix(theta, data)
    k, m = th.shape
    h = np.zeros((k * m, k * m))
    if data.n == 0:
        return h
    p = probabilities(theta, data)[:, 1:]
    designs = [_alt_design(data, j) for j in range(k)]
    for a in range(k):
        for b in range(a, k):
            w = p[:, a] * ((1.0 if a == b else 0.0) - p[:, b])
            block = -(designs[a] * w[:, None]).T @ designs[b]
            h[a * m : (a + 1) * m, b * m : (b + 1) * m] = block
            if a != b:
                h[b * m : (b + 1) * m, a * m : (a + 1) * m] = block.T
    return h


def fisher_information(theta, data: ChoiceDataset):
    """Sample Fisher information -hessian/N with an eigenvalue summary."""
    if data.n == 0:
        raise ValueError("fisher information undefined for an empty dataset")
    info = -hessian(theta, data) / data.n
    eigs = np.linalg.eigvalsh(info)
    min_eig = float(eigs[0])
    return info, min_eig, bool(min_eig > 1e-8)


def _precheck(data: ChoiceDataset) -> None:
    k = data.prices.shape[1]
    counts = data.counts()
    for j in range(1, k + 1):
        if counts[j] == 0:
            raise IdentifiabilityError(
                "ID4", f"alternative {j} is never chosen; its parameters are not identifiable"
            )
    for j in range(k):
        design = _alt_design(data, j)
        rank = np.linalg.matrix_rank(design)
        if rank < design.shape[1]:
            raise IdentifiabilityError(
                "ID3",
                f"design matrix for alternative {j + 1} has rank {rank} < {design.shape[1]}",
            )


def fit_mle(
    data: ChoiceDataset,
    init=None,
    tol: float = 1e-8,
    max_iter: int = 200,
    box_bound: float = BOX_BOUND,
    skip_prechecks: bool = False,
) -> tuple[np.ndarray, FitReport]:
    """Damped Newton ascent with Armijo backtracking.

    Falls back to a gradient step whenever the Hessian solve fails or does
    not yield an ascent direction; the log-likelihood is non-decreasing
    across accepted iterations. Returns the (J-1, d+2) parameter matrix and
    a fit report. Parameters are kept inside the [-box_bound, box_bound]
    box; hitting the box is flagged, not fatal.
    """
    if data.n == 0:
        raise ValueError("cannot fit an empty dataset")
    if not skip_prechecks:
        _precheck(data)
    k, m = data.prices.shape[1], data.feature_dim + 2
    theta = np.zeros(k * m) if init is None else _as_matrix(init, data).ravel().copy()
    ll = log_likelihood(theta, data)
    used_fallback = False
    hit_bound = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g = score(theta, data)
        if np.max(np.abs(g)) <= tol:
            iterations -= 1
            break
        h = hessian(theta, data)
        direction = None
        try:
            cand = np.linalg.solve(-(h - 1e-10 * np.eye(k * m)), g)
            if np.all(np.isfinite(cand)) and g @ cand > 0:
                direction = cand
        except np.linalg.LinAlgError:
            direction = None
        if direction is None:
            used_fallback = True
            direction = g
        slope = g @ direction
        step = 1.0
        accepted = False
        noise = 1e-10 * (1.0 + abs(ll))  # double-precision floor on LL comparisons
        for _ in range(60):
            cand = np.clip(theta + step * direction, -box_bound, box_bound)
            cand_ll = log_likelihood(cand, data)
            if cand_ll >= ll + 1e-4 * step * slope - noise:
                theta, ll = cand, max(cand_ll, ll - noise)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    g = score(theta, data)
    grad_norm = float(np.max(np.abs(g)))
    hit_bound = bool(np.any(np.abs(theta) >= box_bound - 1e-12))
    h = hessian(theta, data)
    try:
        cond = float(np.linalg.cond(-h))
    except np.linalg.LinAlgError:
        cond = float("inf")
    report = FitReport(
        final_log_likelihood=float(ll),
        iterations=iterations,
        grad_norm=grad_norm,
        hessian_condition=cond,
        converged=bool(grad_norm <= tol and not hit_bound),
        hit_bound=hit_bound,
        used_gradient_fallback=used_fallback,
    )
    return theta.reshape(k, m), report


@dataclass
class CheckResult:
    passed: bool
    detail: str


@dataclass
class IdentifiabilityReport:
    """Pass/fail per identifiability condition plus diagnostics."""

    conditions: dict
    design_rank: int
    min_outcome_count: int
    prob_bounds: tuple

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.conditions.values())

    def lines(self) -> list:
        out = []
        for name in sorted(self.conditions):
            c = self.conditions[name]
            out.append(f"{name}: {'pass' if c.passed else 'FAIL'} ({c.detail})")
        return out


def check_identifiability(
    data: ChoiceDataset,
    box_bound: float = BOX_BOUND,
    theta=None,
    prob_floor: float = PROB_FLOOR,
) -> IdentifiabilityReport:
    """Audit the seven identifiability conditions on a dataset.

    ID1/ID2 are structural (baseline normalization, alternative-specific
    price coefficients) and hold by construction of this model family.
    ID5 is evaluated at the fitted parameters and reported against the
    ``prob_floor`` threshold without gating anything else.
    """
    k = data.prices.shape[1]
    conditions = {}
    conditions["ID1"] = CheckResult(True, "baseline alternative pinned at zero utility")
    conditions["ID2"] = CheckResult(True, f"{k} alternative-specific price coefficients")

    ranks = []
    for j in range(k):
        design = _alt_design(data, j)
        ranks.append(int(np.linalg.matrix_rank(design)))
    full = data.feature_dim + 2
    design_rank = min(ranks) if ranks else 0
    conditions["ID3"] = CheckResult(
        design_rank == full, f"min per-alternative design rank {design_rank} of {full}"
    )

    counts = data.counts()
    min_count = int(counts[1:].min()) if k else 0
    conditions["ID4"] = CheckResult(
        min_count >= 1, f"min non-baseline outcome count {min_count}"
    )

    prob_bounds = (float("nan"), float("nan"))
    if conditions["ID3"].passed and conditions["ID4"].passed:
        if theta is None:
            theta, _ = fit_mle(data, box_bound=box_bound, skip_prechecks=True)
        p = probabilities(theta, data)
        prob_bounds = (float(p.min()), float(p.max()))
        conditions["ID5"] = CheckResult(
            prob_bounds[0] >= prob_floor and prob_bounds[1] <= 1 - prob_floor,
            f"observed probabilities in [{prob_bounds[0]:.4f}, {prob_bounds[1]:.4f}],"
            f" threshold {prob_floor}",
        )
        max_abs = float(np.max(np.abs(theta)))
        conditions["ID6"] = CheckResult(
            max_abs < box_bound, f"max |theta| = {max_abs:.3f} inside box [{-box_bound}, {box_bound}]"
        )
        _, min_eig, pd = fisher_information(theta, data)
        conditions["ID7"] = CheckResult(pd, f"Fisher min eigenvalue {min_eig:.3e}")
    else:
        for name in ("ID5", "ID6", "ID7"):
            conditions[name] = CheckResult(False, "skipped: ID3/ID4 preconditions failed")

    return IdentifiabilityReport(
        conditions=conditions,
        design_rank=design_rank,
        min_outcome_count=min_count,
        prob_bounds=prob_bounds,
    )


def _check_X_y(X, y=None, n_alternatives: int = 2):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-dimensional")
    k = n_alternatives - 1
    if X.shape[1] <= k:
        raise ValueError(
            f"X needs {k} price columns plus at least one covariate column, got {X.shape[1]}"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    if y is None:
        return X, None
    y = np.asarray(y, dtype=int)
    if y.shape != (X.shape[0],):
        raise ValueError("y must be one label per row of X")
    return X, y


class MultinomialLogit(BaseEstimator):
    """Multinomial logit estimator with analytic Newton MLE.

    The design matrix packs the per-alternative price regressors first:
    ``X[:, :n_alternatives-1]`` are the dollar prices of the non-baseline
    alternatives and the remaining columns are shared covariates. Labels
    ``y`` index alternatives with 0 as the zero-utility baseline.
    """

    def __init__(
        self,
        n_alternatives: int = 7,
        tol: float = 1e-8,
        max_iter: int = 200,
        box_bound: float = BOX_BOUND,
        run_prechecks: bool = True,
    ):
        self.n_alternatives = n_alternatives
        self.tol = tol
        self.max_iter = max_iter
        self.box_bound = box_bound
        self.run_prechecks = run_prechecks

    def _split(self, X) -> tuple[np.ndarray, np.ndarray]:
        k = self.n_alternatives - 1
        return X[:, :k], X[:, k:]

    def _dataset(self, X, y) -> ChoiceDataset:
        prices, features = self._split(X)
        if y is None:
            y = np.zeros(len(X), dtype=int)
        return ChoiceDataset(prices, features, y)

    def fit(self, X, y):
        X, y = _check_X_y(X, y, self.n_alternatives)
        data = self._dataset(X, y)
        self.theta_, self.report_ = fit_mle(
            data,
            tol=self.tol,
            max_iter=self.max_iter,
            box_bound=self.box_bound,
            skip_prechecks=not self.run_prechecks,
        )
        self.n_iter_ = self.report_.iterations
        self.n_features_in_ = X.shape[1]
        return self

    def _require_fitted(self):
        if not hasattr(self, "theta_"):
            raise NotFittedError("MultinomialLogit must be fitted before use")

    def predict_proba(self, X) -> np.ndarray:
        self._require_fitted()
        X, _ = _check_X_y(X, None, self.n_alternatives)
        return probabilities(self.theta_, self._dataset(X, None))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def score(self, X, y) -> float:
        """Mean log-likelihood per observation."""
        self._require_fitted()
        X, y = _check_X_y(X, y, self.n_alternatives)
        data = self._dataset(X, y)
        return log_likelihood(self.theta_, data) / max(data.n, 1)

    def identifiability_report(self, X, y) -> IdentifiabilityReport:
        X, y = _check_X_y(X, y, self.n_alternatives)
        theta = getattr(self, "theta_", None)
        return check_identifiability(self._dataset(X, y), box_bound=self.box_bound, theta=theta)


# ---------------------------------------------------------------------------
# Deployed choice model: booking block + shock block.
# ---------------------------------------------------------------------------

PARAMS_SCHEMA_VERSION = 1


@dataclass
class ChoiceModel:
    """Calibrated booking + shock MNL pair used by the learning agents."""

    booking_theta: np.ndarray
    shock_theta: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.booking_theta = np.asarray(self.booking_theta, dtype=float)
        self.shock_theta = np.asarray(self.shock_theta, dtype=float)

    @property
    def n_room_types(self) -> int:
        return self.booking_theta.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.booking_theta.shape[1] - 2

    def booking_probabilities(self, features, prices) -> np.ndarray:
        """Choice distribution over (outside, room types) at given prices."""
        data = ChoiceDataset(
            np.asarray(prices, dtype=float)[None, :], np.asarray(features, dtype=float)[None, :], [0]
        )
        return probabilities(self.booking_theta, data)[0]

    def shock_probs(self, features, booked_price: float) -> np.ndarray:
        data = ChoiceDataset(
            np.full((1, len(SHOCK_OUTCOMES) - 1), float(booked_price)),
            np.asarray(features, dtype=float)[None, :],
            [0],
        )
        return probabilities(self.shock_theta, data)[0]

    def expected_delayed_reward(self, order: Order, revenues=None) -> float:
        """Expected shock revenue of one order under the fitted shock block."""
        probs = self.shock_probs(order.features, order.booked_price)
        if revenues is None:
            revenues = expected_shock_revenues(order.booked_price)
        return float(probs @ np.asarray(revenues, dtype=float))

    def sample_shock(self, order: Order, rng: np.random.Generator) -> tuple[int, float]:
        """Draw a synthetic shock outcome and its revenue for one order."""
        probs = self.shock_probs(order.features, order.booked_price)
        z = sample_outcome(probs, rng)
        delta = 0.0
        if SHOCK_OUTCOMES[z] == "modify":
            delta = float(rng.uniform(-MODIFY_BAND, MODIFY_BAND) * order.booked_price)
        return z, shock_revenue(z, order.booked_price, delta)

    def save(self, path) -> None:
        doc = {
            "schema_version": PARAMS_SCHEMA_VERSION,
            "booking_theta": self.booking_theta.tolist(),
            "shock_theta": self.shock_theta.tolist(),
            "meta": self.meta,
        }
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "ChoiceModel":
        doc = json.loads(Path(path).read_text())
        if doc.get("schema_version") != PARAMS_SCHEMA_VERSION:
            raise ValueError(f"unsupported parameter schema {doc.get('schema_version')}")
        return cls(
            booking_theta=np.array(doc["booking_theta"], dtype=float),
            shock_theta=np.array(doc["shock_theta"], dtype=float),
            meta=doc.get("meta", {}),
        )


def expected_delayed_reward(model: ChoiceModel, order: Order, revenues=None) -> float:
    """Module-level alias of :meth:`ChoiceModel.expected_delayed_reward`."""
    return model.expected_delayed_reward(order, revenues)


def calibrate(
    booking_data: ChoiceDataset,
    shock_data: ChoiceDataset,
    tol: float = 1e-8,
    max_iter: int = 200,
    meta: dict | None = None,
) -> tuple[ChoiceModel, FitReport, FitReport]:
    """Fit booking and shock blocks as two independent MLE problems."""
    booking_theta, booking_report = fit_mle(booking_data, tol=tol, max_iter=max_iter)
    shock_theta, shock_report = fit_mle(shock_data, tol=tol, max_iter=max_iter)
    model = ChoiceModel(
        booking_theta=booking_theta,
        shock_theta=shock_theta,
        meta=dict(meta or {}, n_booking=booking_data.n, n_shock=shock_data.n),
    )
    return model, booking_report, shock_report


# ---------------------------------------------------------------------------
# Calibration data synthesis and CSV interchange.
# ---------------------------------------------------------------------------


def gen_calibration_data(
    spec: BehaviorSpec,
    config: EnvConfig,
    n_customers: int,
    seed: int,
) -> tuple[ChoiceDataset, ChoiceDataset]:
    """Synthesize iid calibration observations from a behavior family.

    Each customer gets a uniform random price level and an epoch drawn
    uniformly over the episode, so dynamic-mixture behavior is sampled
    across its full period. Booked customers contribute one shock
    observation whose outcome is drawn from the true shock model.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    k = config.n_room_types
    b_prices = np.empty((n_customers, k))
    b_features = np.empty((n_customers, config.feature_dim))
    b_chosen = np.empty(n_customers, dtype=int)
    s_prices, s_features, s_chosen = [], [], []
    for i in range(n_customers):
        epoch = int(rng.integers(0, config.episode_length))
        x = sample_customer_features(config, rng)
        action = int(rng.integers(0, config.n_actions))
        prices = config.room_prices(action)
        probs = choice_probabilities(
            spec,
            x,
            prices,
            epoch=epoch,
            demand_scale=config.demand_scale,
            competition_scale=config.competition_scale,
        )
        choice = sample_outcome(probs, rng)
        b_prices[i] = prices
        b_features[i] = x
        b_chosen[i] = choice
        if choice > 0:
            room = choice - 1
            order = Order(
                id=i,
                features=x,
                room_type=room,
                booked_price=float(prices[room]),
                created_at=epoch,
                matures_at=epoch + 1,
            )
            z = sample_outcome(shock_probabilities(spec, order), rng)
            s_prices.append(np.full(len(SHOCK_OUTCOMES) - 1, order.booked_price))
            s_features.append(x)
            s_chosen.append(z)
    booking = ChoiceDataset(b_prices, b_features, b_chosen)
    shock = ChoiceDataset(np.array(s_prices), np.array(s_features), np.array(s_chosen))
    return booking, shock


def write_calibration_csv(path, booking: ChoiceDataset, shock: ChoiceDataset) -> None:
    """One row per observation: obs_type, chosen_index, prices, features.

    Booking rows carry price_0 = 0 for the outside option and the room
    prices in price_1..price_K; shock rows put the booked price in price_0.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    k = booking.prices.shape[1]
    d = booking.feature_dim
    header = (
        ["obs_type", "chosen_index"]
        + [f"price_{j}" for j in range(k + 1)]
        + [f"feat_{i}" for i in range(d)]
    )
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(booking.n):
            writer.writerow(
                ["booking", int(booking.chosen[i])]
                + [0.0]
                + [repr(float(v)) for v in booking.prices[i]]
                + [repr(float(v)) for v in booking.features[i]]
            )
        for i in range(shock.n):
            writer.writerow(
                ["shock", int(shock.chosen[i])]
                + [repr(float(shock.prices[i, 0]))]
                + [0.0] * k
                + [repr(float(v)) for v in shock.features[i]]
            )


def read_calibration_csv(path) -> tuple[ChoiceDataset, ChoiceDataset]:
    path = Path(path)
    b_rows, s_rows = [], []
    with path.open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_price = sum(1 for h in header if h.startswith("price_"))
        for row in reader:
            obs_type, chosen = row[0], int(row[1])
            prices = [float(v) for v in row[2 : 2 + n_price]]
            feats = [float(v) for v in row[2 + n_price :]]
            if obs_type == "booking":
                b_rows.append((prices[1:], feats, chosen))
            elif obs_type == "shock":
                s_rows.append(([prices[0]] * (len(SHOCK_OUTCOMES) - 1), feats, chosen))
            else:
                raise ValueError(f"unknown obs_type {obs_type!r}")
    booking = ChoiceDataset(
        np.array([r[0] for r in b_rows]),
        np.array([r[1] for r in b_rows]),
        np.array([r[2] for r in b_rows]),
    )
    shock = ChoiceDataset(
        np.array([r[0] for r in s_rows]),
        np.array([r[1] for r in s_rows]),
        np.array([r[2] for r in s_rows]),
    )
    return booking, shock
