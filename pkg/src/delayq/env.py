"""Delayed-feedback booking MDP.

One decision epoch: observe inventory, set a price level, watch one
customer arrive (or not), book a room or lose the sale, then resolve every
pending order whose shock matures this epoch. Bookings create orders whose
shock outcome (keep / modify / cancel / no-show) is pre-sampled at creation
but stays hidden until the maturity epoch, which keeps replay bit-exact
under a fixed seed.

Two revenue notions are kept apart throughout: the *realized cashflow* of
an epoch (immediate revenue plus shocks of earlier orders maturing now) and
the *learning label* of a decision (immediate revenue plus the shocks its
own new orders eventually produce).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .behavior import (
    BehaviorSpec,
    CANCEL,
    KEEP,
    MODIFY,
    NO_SHOW,
    SHOCK_OUTCOMES,
    choice_probabilities,
    sample_outcome,
    shock_probabilities,
)

#: Default 13 price levels spanning 450..800 dollars.
DEFAULT_PRICE_LEVELS = tuple(round(450.0 + 350.0 * k / 12.0, 2) for k in range(13))

#: Room-type price multipliers applied to the chosen level.
DEFAULT_TYPE_MULTIPLIERS = (0.85, 0.92, 1.00, 1.06, 1.12, 1.18)

#: Relative width of the modify-shock price delta band.
MODIFY_BAND = 0.15


@dataclass(frozen=True)
class EnvConfig:
    """Simulator configuration; validate() names the offending field."""

    capacity: int = 26
    price_levels: tuple = DEFAULT_PRICE_LEVELS
    n_room_types: int = 6
    delay_support: tuple = tuple(range(1, 15))
    episode_length: int = 82
    demand_scale: float = 1.0
    competition_scale: float = 1.0
    feature_dim: int = 12
    arrival_rate: float = 1.0
    type_multipliers: tuple = DEFAULT_TYPE_MULTIPLIERS

    def validate(self) -> None:
        if self.capacity < 1:
            raise ValueError("capacity >= 1")
        levels = np.asarray(self.price_levels, dtype=float)
        if levels.ndim != 1 or len(levels) < 1 or np.any(np.diff(levels) <= 0):
            raise ValueError("price_levels must be strictly increasing")
        if len(self.delay_support) == 0 or min(self.delay_support) < 1:
            raise ValueError("delay_support must be a non-empty set of positive days")
        if self.episode_length < 1:
            raise ValueError("episode_length >= 1")
        if self.demand_scale <= 0:
            raise ValueError("demand_scale > 0")
        if self.competition_scale <= 0:
            raise ValueError("competition_scale > 0")
        if self.feature_dim < 6:
            raise ValueError("feature_dim >= 6 (days-to-arrival + 2 channel + 3 loyalty dummies)")
        if not (0.0 < self.arrival_rate <= 1.0):
            raise ValueError("arrival_rate in (0, 1]")
        if len(self.type_multipliers) != self.n_room_types:
            raise ValueError("type_multipliers must have one entry per room type")

    @property
    def n_actions(self) -> int:
        return len(self.price_levels)

    @property
    def max_delay(self) -> int:
        return max(self.delay_support)

    def room_prices(self, action: int) -> np.ndarray:
        """Dollar price of each room type at the chosen price level."""
        return self.price_levels[action] * np.asarray(self.type_multipliers)


@dataclass(frozen=True)
class Order:
    """One booking awaiting its shock outcome.

    ``outcome`` stays None until the clock reaches ``matures_at``; the
    simulator keeps the pre-sampled outcome hidden in the state.
    """

    id: int
    features: np.ndarray
    room_type: int
    booked_price: float
    created_at: int
    matures_at: int
    outcome: int | None = None


@dataclass
class SimState:
    """Full environment state between decision epochs."""

    config: EnvConfig
    behavior: BehaviorSpec
    inventory: int
    clock: int
    pending: tuple
    rng: np.random.Generator
    next_order_id: int = 0
    # Hidden per-order draws: id -> (outcome, shock_revenue).
    hidden: dict = field(default_factory=dict)

    @property
    def done(self) -> bool:
        return self.clock >= self.config.episode_length


@dataclass(frozen=True)
class StepOutcome:
    """Everything observable from one epoch."""

    immediate_revenue: float
    new_orders: tuple
    matured_shocks: tuple  # of (Order, outcome, shock_revenue)
    next_inventory: int
    customer_features: np.ndarray | None
    force_matured_ids: tuple = ()


def shock_revenue(outcome: int, booked_price: float, modify_delta: float = 0.0) -> float:
    """Deterministic per-order shock revenue mapping.

    keep and no-show pay nothing extra, cancel refunds the booked price,
    modify applies the order's fixed price delta.
    """
    if outcome == KEEP or outcome == NO_SHOW:
        return 0.0
    if outcome == CANCEL:
        return -booked_price
    if outcome == MODIFY:
        return modify_delta
    raise ValueError(f"unknown shock outcome {outcome}")


def expected_shock_revenues(booked_price: float) -> np.ndarray:
    """Expected revenue of each outcome; the modify delta is mean-zero."""
    return np.array([0.0, 0.0, -booked_price, 0.0])


def sample_customer_features(config: EnvConfig, rng: np.random.Generator) -> np.ndarray:
    """12-dim customer feature draw.

    Component 0 is days-to-arrival (uniform integer 1..90 scaled to [0,1]),
    components 1-2 booking-channel dummies (direct is the reference
    category), 3-5 loyalty-tier dummies (bronze is the reference), and the
    rest standard uniform. Reference-category coding keeps the categorical
    blocks linearly independent of a model intercept.
    """
    x = np.zeros(config.feature_dim)
    x[0] = rng.integers(1, 91) / 90.0
    channel = rng.choice(3, p=[0.45, 0.40, 0.15])
    if channel > 0:
        x[channel] = 1.0
    loyalty = rng.choice(4, p=[0.40, 0.30, 0.20, 0.10])
    if loyalty > 0:
        x[2 + loyalty] = 1.0
    if config.feature_dim > 6:
        x[6:] = rng.random(config.feature_dim - 6)
    return x


def reset(config: EnvConfig, behavior: BehaviorSpec, seed: int) -> SimState:
    """Fresh episode: full inventory, clock zero, empty pending set."""
    config.validate()
    if behavior.n_room_types != config.n_room_types:
        raise ValueError("n_room_types of behavior spec and config disagree")
    if behavior.feature_dim != config.feature_dim:
        raise ValueError("feature_dim of behavior spec and config disagree")
    return SimState(
        config=config,
        behavior=behavior,
        inventory=config.capacity,
        clock=0,
        pending=(),
        rng=np.random.default_rng(seed),
    )


def step(state: SimState, action: int) -> tuple[SimState, StepOutcome]:
    """Advance one epoch under the chosen price level.

    Draw order is fixed for replay: arrival, features, choice, delay,
    shock outcome, modify delta. Cancellations restore inventory capped at
    capacity. Pending orders still open at the final epoch are force-
    matured and flagged.
    """
    cfg = state.config
    if not (0 <= action < cfg.n_actions):
        raise ValueError(f"action index {action} out of range [0, {cfg.n_actions})")
    if state.done:
        raise ValueError("episode already finished")
    rng = state.rng
    inventory = state.inventory

    arrived = True
    if cfg.arrival_rate < 1.0:
        arrived = rng.random() < cfg.arrival_rate

    features = None
    immediate = 0.0
    new_orders = ()
    hidden = dict(state.hidden)
    next_id = state.next_order_id
    if arrived:
        features = sample_customer_features(cfg, rng)
        if inventory == 0:
            choice = 0
        else:
            prices = cfg.room_prices(action)
            probs = choice_probabilities(
                state.behavior,
                features,
                prices,
                epoch=state.clock,
                demand_scale=cfg.demand_scale,
                competition_scale=cfg.competition_scale,
            )
            choice = sample_outcome(probs, rng)
        if choice > 0:
            room = choice - 1
            price = float(cfg.room_prices(action)[room])
            delay = int(rng.choice(np.asarray(cfg.delay_support)))
            order = Order(
                id=next_id,
                features=features,
                room_type=room,
                booked_price=price,
                created_at=state.clock,
                matures_at=state.clock + delay,
            )
            z = sample_outcome(shock_probabilities(state.behavior, order), rng)
            delta = 0.0
            if z == MODIFY:
                delta = float(rng.uniform(-MODIFY_BAND, MODIFY_BAND) * price)
            hidden[order.id] = (z, shock_revenue(z, price, delta))
            next_id += 1
            inventory -= 1
            immediate = price
            new_orders = (order,)

    new_clock = state.clock + 1
    matured = []
    still_pending = []
    forced = []
    for order in state.pending + new_orders:
        force = new_clock >= cfg.episode_length and order.matures_at > new_clock
        if order.matures_at == new_clock or force:
            z, rev = hidden.pop(order.id)
            matured.append((replace(order, outcome=z), z, rev))
            if z == CANCEL:
                inventory = min(inventory + 1, cfg.capacity)
            if force:
                forced.append(order.id)
        else:
            still_pending.append(order)

    next_state = SimState(
        config=cfg,
        behavior=state.behavior,
        inventory=inventory,
        clock=new_clock,
        pending=tuple(still_pending),
        rng=rng,
        next_order_id=next_id,
        hidden=hidden,
    )
    outcome = StepOutcome(
        immediate_revenue=immediate,
        new_orders=new_orders,
        matured_shocks=tuple(matured),
        next_inventory=inventory,
        customer_features=features,
        force_matured_ids=tuple(forced),
    )
    return next_state, outcome


def realized_cashflow(outcome: StepOutcome) -> float:
    """Money observed this epoch: immediate revenue plus maturing shocks."""
    return outcome.immediate_revenue + sum(rev for _, _, rev in outcome.matured_shocks)


def decompose_label(outcome: StepOutcome, later_maturations) -> tuple[float, float]:
    """Split a decision's learning label into (immediate, delayed) parts.

    ``later_maturations`` maps order id -> realized shock revenue for
    exactly this epoch's new orders, assembled once they mature.
    """
    expected_ids = {o.id for o in outcome.new_orders}
    got = dict(later_maturations)
    if set(got) != expected_ids:
        raise ValueError(
            f"maturation ids {sorted(got)} do not match this epoch's new orders {sorted(expected_ids)}"
        )
    r_del = float(sum(got.values()))
    return float(outcome.immediate_revenue), r_del


EPISODE_LOG_COLUMNS = (
    "epoch",
    "inventory",
    "action_index",
    "price",
    "immediate_revenue",
    "n_new_orders",
    "n_matured",
    "realized_cashflow",
)


def episode_log_row(epoch: int, inventory: int, action: int, config: EnvConfig, outcome: StepOutcome) -> dict:
    return {
        "epoch": epoch,
        "inventory": inventory,
        "action_index": action,
        "price": config.price_levels[action],
        "immediate_revenue": outcome.immediate_revenue,
        "n_new_orders": len(outcome.new_orders),
        "n_matured": len(outcome.matured_shocks),
        "realized_cashflow": realized_cashflow(outcome),
    }


def write_episode_log(path, rows) -> None:
    """Export an episode log as CSV with the documented column set."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=EPISODE_LOG_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def run_episode(config: EnvConfig, behavior: BehaviorSpec, seed: int, policy) -> tuple[float, list]:
    """Roll one full episode under ``policy(inventory, clock) -> action``.

    Returns total realized cashflow (force-matured shocks included) and
    the per-epoch log rows.
    """
    state = reset(config, behavior, seed)
    total = 0.0
    rows = []
    while not state.done:
        action = int(policy(state.inventory, state.clock))
        inventory_before = state.inventory
        state, outcome = step(state, action)
        total += realized_cashflow(outcome)
        rows.append(episode_log_row(state.clock - 1, inventory_before, action, config, outcome))
    return total, rows
