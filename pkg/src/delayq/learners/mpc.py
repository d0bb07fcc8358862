"""Planning baseline: Monte-Carlo action scoring with the fitted DCM.

MPC evaluates each price level by simulating constant-action rollouts in a
behavior-free copy of the environment whose customer responses come from
the calibrated choice model, then picks the action with the highest mean
return. Common random numbers are shared across actions within a decision
to reduce argmax variance.
"""

from __future__ import annotations

import numpy as np

from ..dcm import ChoiceModel
from ..env import EnvConfig, Order, sample_customer_features
from ..behavior import sample_outcome


def mpc_select_action(
    rollout_fn,
    state,
    n_actions: int,
    rollouts: int,
    horizon: int,
    rng: np.random.Generator,
) -> int:
    """Argmax over actions of the mean rollout return, lowest index on ties.

    ``rollout_fn(state, action, horizon, rng)`` returns one sampled return;
    a horizon of zero means the expected immediate reward of the action.
    Every action sees the same per-rollout random streams.
    """
    if rollouts < 1:
        raise ValueError("rollouts must be positive")
    seeds = rng.integers(0, 2**63 - 1, size=rollouts)
    scores = np.empty(n_actions)
    for a in range(n_actions):
        total = 0.0
        for r in range(rollouts):
            total += rollout_fn(state, a, horizon, np.random.default_rng(int(seeds[r])))
        scores[a] = total / rollouts
    return int(np.argmax(scores))


class DcmWorldModel:
    """Environment mechanics driven by the fitted choice model.

    Rollouts hold the price level constant, accrue each epoch's learning
    label (immediate revenue plus model-sampled shock revenues of the
    epoch's order), and schedule inventory restoration for sampled
    cancellations after a sampled delay.
    """

    def __init__(self, model: ChoiceModel, config: EnvConfig):
        self.model = model
        self.config = config

    def rollout(self, inventory: int, action: int, horizon: int, rng: np.random.Generator) -> float:
        cfg = self.config
        prices = cfg.room_prices(action)
        if horizon == 0:
            if inventory <= 0:
                return 0.0
            x = sample_customer_features(cfg, rng)
            probs = self.model.booking_probabilities(x, prices)
            return float(probs[1:] @ prices)
        inv = int(inventory)
        total = 0.0
        restores = np.zeros(horizon + cfg.max_delay + 2, dtype=int)
        from ..env import CANCEL  # local import to avoid cycle at module load

        for k in range(horizon):
            inv = min(inv + int(restores[k]), cfg.capacity)
            arrived = cfg.arrival_rate >= 1.0 or rng.random() < cfg.arrival_rate
            if not arrived:
                continue
            x = sample_customer_features(cfg, rng)
            if inv <= 0:
                continue
            probs = self.model.booking_probabilities(x, prices)
            choice = sample_outcome(probs, rng)
            if choice == 0:
                continue
            room = choice - 1
            price = float(prices[room])
            inv -= 1
            total += price
            order = Order(
                id=-1,
                features=x,
                room_type=room,
                booked_price=price,
                created_at=k,
                matures_at=k + 1,
            )
            z, revenue = self.model.sample_shock(order, rng)
            total += revenue
            if z == CANCEL:
                delay = int(rng.choice(np.asarray(cfg.delay_support)))
                restores[k + delay] += 1
        return total


class MpcPolicy:
    """Greedy MPC controller over the DCM world model."""

    def __init__(self, model: ChoiceModel, config: EnvConfig, rollouts: int = 30, horizon: int = 24):
        self.world = DcmWorldModel(model, config)
        self.rollouts = rollouts
        self.horizon = horizon
        self.n_actions = config.n_actions

    def action(self, inventory: int, clock: int, rng: np.random.Generator) -> int:
        def rollout_fn(state, a, horizon, r):
            return self.world.rollout(state, a, horizon, r)

        return mpc_select_action(
            rollout_fn, inventory, self.n_actions, self.rollouts, self.horizon, rng
        )
