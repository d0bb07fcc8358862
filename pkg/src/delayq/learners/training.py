"""Episode loops wiring the reward pipelines into shared update rules.

Methods: ``mb`` waits for true delayed labels (maturity buffer), ``ca``
imputes them from the calibrated choice model at decision time, ``ca-dr``
uses the doubly-robust target (model expectation while pending, patched to
the realized label on maturation in the replay variant), and ``mpc`` plans
with the model instead of learning. Variants: ``tabular`` and ``dqn``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dcm import ChoiceModel
from ..env import SimState, realized_cashflow, step
from ..seeding import derive_seed
from .mlp import Adam, MlpParams, dqn_train_step, encode_inventory, mlp_forward
from .mpc import MpcPolicy
from .replay import (
    MaturityBuffer,
    ReplayBuffer,
    TransitionRecord,
    doubly_robust_target,
    impute_synthetic_transition,
)
from .tabular import QTable, epsilon_greedy, tabular_q_update

METHODS = ("mb", "ca", "ca-dr", "mpc")
VARIANTS = ("tabular", "dqn")


@dataclass
class TrainConfig:
    """Hyperparameters shared by all methods."""

    episodes: int = 82
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    epsilon_decay_episodes: int = 100
    reward_clip: float = 1000.0
    # DQN
    learning_rate: float = 1e-3
    batch_size: int = 32
    buffer_capacity: int = 10_000
    min_fill: int = 1_000
    target_sync: int = 100
    hidden: tuple = (128, 128)
    # CA option: also sample the next state from the model
    synthetic_next_state: bool = False
    # MPC
    mpc_rollouts: int = 30
    mpc_horizon: int = 24

    def epsilon(self, episode: int) -> float:
        frac = min(episode / max(self.epsilon_decay_episodes, 1), 1.0)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


class TabularPolicy:
    def __init__(self, table: QTable):
        self.table = table

    def action(self, inventory: int, clock: int, rng=None) -> int:
        return int(np.argmax(self.table.values[inventory]))


class DqnPolicy:
    def __init__(self, params: MlpParams, capacity: int):
        self.params = params
        self.capacity = capacity

    def q_values(self, inventory: int) -> np.ndarray:
        return mlp_forward(self.params, encode_inventory(inventory, self.capacity))

    def action(self, inventory: int, clock: int, rng=None) -> int:
        return int(np.argmax(self.q_values(inventory)))


@dataclass
class TrainResult:
    policy: object
    learning_curve: list
    diagnostics: dict = field(default_factory=dict)


def _clip(x: float, bound: float) -> float:
    return float(min(max(x, -bound), bound))


def run_training(
    env_factory,
    method: str,
    variant: str,
    config: TrainConfig,
    seed: int,
    model: ChoiceModel | None = None,
) -> TrainResult:
    """Full training loop; fully reproducible from its arguments."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if method in ("ca", "ca-dr", "mpc") and model is None:
        raise ValueError(f"method {method!r} requires a calibrated choice model")

    probe = env_factory(derive_seed(seed, "probe"))
    env_config = probe.config
    n_states = env_config.capacity + 1
    n_actions = env_config.n_actions

    if method == "mpc":
        policy = MpcPolicy(
            model, env_config, rollouts=config.mpc_rollouts, horizon=config.mpc_horizon
        )
        return TrainResult(policy=policy, learning_curve=[], diagnostics={"method": method})

    agent_rng = np.random.default_rng(derive_seed(seed, "agent"))
    diagnostics = {
        "method": method,
        "variant": variant,
        "inserted_by_provenance": {},
        "max_insertion_latency": 0,
        "forced_releases": 0,
        "train_steps": 0,
        "dr_patched": 0,
    }

    table = QTable.zeros(n_states, n_actions) if variant == "tabular" else None
    params = target = adam = replay = None
    if variant == "dqn":
        params = MlpParams.init(
            in_dim=n_states + 1,
            hidden=config.hidden,
            out_dim=n_actions,
            rng=np.random.default_rng(derive_seed(seed, "init")),
        )
        target = params.copy()
        adam = Adam(params)
        replay = ReplayBuffer(capacity=config.buffer_capacity, min_fill=config.min_fill)

    def q_of(s: int) -> np.ndarray:
        if variant == "tabular":
            return table.values[s]
        return mlp_forward(params, encode_inventory(s, env_config.capacity))

    def consume(record: TransitionRecord) -> int | None:
        """Apply one completed record; returns the replay ticket if any."""
        prov = record.provenance
        diagnostics["inserted_by_provenance"][prov] = (
            diagnostics["inserted_by_provenance"].get(prov, 0) + 1
        )
        if record.forced:
            diagnostics["forced_releases"] += 1
        if variant == "tabular":
            tabular_q_update(
                table,
                record.s,
                record.a,
                record.reward_target,
                record.s_next,
                config.gamma,
                terminal=record.terminal,
            )
            return None
        return replay.add(record)

    learning_curve = []
    for episode in range(config.episodes):
        eps = config.epsilon(episode)
        state = env_factory(derive_seed(seed, "episode", episode))
        maturity = MaturityBuffer() if method == "mb" else None
        dr_orders: dict = {}
        episode_cash = 0.0
        while not state.done:
            s = state.inventory
            decision_epoch = state.clock
            a = epsilon_greedy(q_of(s), eps, agent_rng)
            state, outcome = step(state, a)
            s_next = state.inventory
            terminal = state.done
            episode_cash += realized_cashflow(outcome)
            r_imm = outcome.immediate_revenue
            order_ids = tuple(o.id for o in outcome.new_orders)

            if method == "mb":
                for rec in maturity.admit(
                    s, a, s_next, r_imm, order_ids, decision_epoch, terminal
                ):
                    _track_latency(diagnostics, state.clock, rec)
                    consume(rec)
            elif method == "ca":
                rec = impute_synthetic_transition(
                    model,
                    s,
                    a,
                    s_next,
                    r_imm,
                    outcome.new_orders,
                    agent_rng,
                    epoch=decision_epoch,
                    terminal=terminal,
                )
                if config.synthetic_next_state:
                    rec = _with_synthetic_next_state(rec, state, model, agent_rng)
                rec.reward_target = _clip(rec.reward_target, config.reward_clip)
                _track_latency(diagnostics, state.clock, rec, latency=0)
                consume(rec)
            elif method == "ca-dr":
                m = sum(model.expected_delayed_reward(o) for o in outcome.new_orders)
                pending = doubly_robust_target(r_imm, m, matured=False)
                rec = TransitionRecord(
                    s=s,
                    a=a,
                    reward_target=_clip(pending, config.reward_clip),
                    s_next=s_next,
                    provenance="doubly_robust",
                    epoch=decision_epoch,
                    terminal=terminal,
                    order_ids=order_ids,
                )
                _track_latency(diagnostics, state.clock, rec, latency=0)
                ticket = consume(rec)
                if variant == "dqn" and order_ids:
                    # At most one arrival per epoch, so one order per record.
                    dr_orders[order_ids[0]] = (ticket, r_imm)

            # Maturations complete earlier decisions.
            if method == "mb":
                forced_ids = set(outcome.force_matured_ids)
                for order, _, revenue in outcome.matured_shocks:
                    for rec in maturity.observe(
                        order.id, revenue, forced=order.id in forced_ids
                    ):
                        rec.reward_target = _clip(rec.reward_target, config.reward_clip)
                        _track_latency(diagnostics, state.clock, rec)
                        consume(rec)
            elif method == "ca-dr" and variant == "dqn":
                for order, _, revenue in outcome.matured_shocks:
                    if order.id in dr_orders:
                        ticket, held_imm = dr_orders.pop(order.id)
                        matured_target = doubly_robust_target(
                            held_imm, 0.0, matured=True, r_del=revenue
                        )
                        if replay.patch(ticket, _clip(matured_target, config.reward_clip)):
                            diagnostics["dr_patched"] += 1

            if variant == "dqn" and replay.ready:
                batch = replay.sample(config.batch_size, agent_rng)
                dqn_train_step(
                    params,
                    target,
                    batch,
                    config.gamma,
                    adam,
                    encode=lambda s: encode_inventory(s, env_config.capacity),
                    lr=config.learning_rate,
                )
                diagnostics["train_steps"] += 1
                if diagnostics["train_steps"] % config.target_sync == 0:
                    target = params.copy()
        learning_curve.append(episode_cash)

    policy = (
        TabularPolicy(table)
        if variant == "tabular"
        else DqnPolicy(params, env_config.capacity)
    )
    if variant == "tabular":
        diagnostics["q_table"] = table
    else:
        diagnostics["replay"] = replay
    return TrainResult(policy=policy, learning_curve=learning_curve, diagnostics=diagnostics)


def _track_latency(diagnostics, clock, record, latency=None):
    lat = (clock - record.epoch) if latency is None else latency
    diagnostics["max_insertion_latency"] = max(diagnostics["max_insertion_latency"], lat)


def _with_synthetic_next_state(record, state, model, rng):
    """Optional mode: sample the next inventory from the model as well."""
    cfg = state.config
    from ..env import CANCEL, sample_customer_features
    from ..behavior import sample_outcome

    inv = record.s
    x = sample_customer_features(cfg, rng)
    if inv > 0:
        probs = model.booking_probabilities(x, cfg.room_prices(record.a))
        if sample_outcome(probs, rng) > 0:
            inv -= 1
    cancels = 0
    for order in state.pending:
        z, _ = model.sample_shock(order, rng)
        if z == CANCEL:
            cancels += 1
    record.s_next = int(min(max(inv + cancels, 0), cfg.capacity))
    return record


def train_agent(
    env_factory,
    method: str,
    variant: str,
    config: TrainConfig,
    seed: int,
    model: ChoiceModel | None = None,
):
    """Train one agent; returns (policy, learning curve)."""
    result = run_training(env_factory, method, variant, config, seed, model)
    return result.policy, result.learning_curve


@dataclass
class EvalStats:
    mean: float
    sd: float
    revenues: list
    flagged_empty: bool = False


def evaluate_policy(env_factory, policy, n_episodes: int, seed: int) -> EvalStats:
    """Greedy execution; per-episode realized total cashflow."""
    if n_episodes == 0:
        return EvalStats(mean=float("nan"), sd=float("nan"), revenues=[], flagged_empty=True)
    revenues = []
    for episode in range(n_episodes):
        state = env_factory(derive_seed(seed, "eval", episode))
        decision_rng = np.random.default_rng(derive_seed(seed, "eval-decisions", episode))
        total = 0.0
        while not state.done:
            a = policy.action(state.inventory, state.clock, decision_rng)
            state, outcome = step(state, a)
            total += realized_cashflow(outcome)
        revenues.append(total)
    arr = np.asarray(revenues)
    sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return EvalStats(mean=float(arr.mean()), sd=sd, revenues=revenues)


class TabularAgent:
    """fit/predict wrapper around the tabular training loop."""

    def __init__(self, method: str = "mb", config: TrainConfig | None = None, seed: int = 0,
                 model: ChoiceModel | None = None):
        self.method = method
        self.config = config or TrainConfig()
        self.seed = seed
        self.model = model

    def fit(self, env_factory):
        result = run_training(env_factory, self.method, "tabular", self.config, self.seed, self.model)
        self.policy_ = result.policy
        self.learning_curve_ = result.learning_curve
        self.diagnostics_ = result.diagnostics
        return self

    def predict(self, inventory: int, clock: int = 0) -> int:
        return self.policy_.action(inventory, clock)


class DqnAgent(TabularAgent):
    """fit/predict wrapper around the DQN training loop."""

    def fit(self, env_factory):
        result = run_training(env_factory, self.method, "dqn", self.config, self.seed, self.model)
        self.policy_ = result.policy
        self.learning_curve_ = result.learning_curve
        self.diagnostics_ = result.diagnostics
        return self


def save_qtable_csv(path, table: QTable) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["state"]
            + [f"q_{a}" for a in range(table.n_actions)]
            + [f"visits_{a}" for a in range(table.n_actions)]
        )
        for s in range(table.n_states):
            writer.writerow(
                [s]
                + [repr(float(v)) for v in table.values[s]]
                + [int(v) for v in table.visit_counts[s]]
            )


def load_qtable_csv(path) -> QTable:
    with Path(path).open() as fh:
        reader = csv.reader(fh)
        next(reader)
        values, visits = [], []
        for row in reader:
            k = (len(row) - 1) // 2
            values.append([float(v) for v in row[1 : 1 + k]])
            visits.append([int(v) for v in row[1 + k :]])
    return QTable(values=np.array(values), visit_counts=np.array(visits, dtype=np.int64))


def save_curve_csv(path, curve) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "revenue"])
        for i, value in enumerate(curve):
            writer.writerow([i, repr(float(value))])
