"""Transition records, replay ring buffer, maturity buffer, reward targets.

The three learning pipelines differ only in how a decision's delayed
reward enters its transition record: wait for the true shocks (maturity
buffer), sample them from the calibrated choice model at decision time
(imputation), or blend model expectation with realized outcomes
(doubly-robust).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..dcm import ChoiceModel

PROVENANCE = ("matured", "imputed", "doubly_robust")


@dataclass
class TransitionRecord:
    """One learning tuple; ``provenance`` tags how the target was formed."""

    s: int
    a: int
    reward_target: float
    s_next: int
    provenance: str
    epoch: int = 0
    terminal: bool = False
    order_ids: tuple = ()
    forced: bool = False

    def __post_init__(self):
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")


class ReplayBuffer:
    """Uniform-sampling ring buffer with patch-in-place support.

    ``add`` returns a monotone ticket; ``patch`` rewrites the record's
    reward while the ticket is still resident (doubly-robust pipelines
    correct pending targets once the true shocks mature).
    """

    def __init__(self, capacity: int = 10_000, min_fill: int = 1_000):
        if capacity < 1 or min_fill < 1:
            raise ValueError("capacity and min_fill must be positive")
        self.capacity = capacity
        self.min_fill = min_fill
        self._data: list = []
        self._count = 0

    def __len__(self) -> int:
        return len(self._data)

    @property
    def ready(self) -> bool:
        return len(self._data) >= self.min_fill

    def add(self, record: TransitionRecord) -> int:
        ticket = self._count
        if len(self._data) < self.capacity:
            self._data.append(record)
        else:
            self._data[ticket % self.capacity] = record
        self._count += 1
        return ticket

    def patch(self, ticket: int, reward_target: float, provenance: str | None = None) -> bool:
        """Rewrite a resident record's target; returns False if evicted."""
        if ticket < 0 or ticket >= self._count:
            raise KeyError(f"unknown replay ticket {ticket}")
        if ticket < self._count - self.capacity:
            return False
        rec = self._data[ticket % self.capacity]
        self._data[ticket % self.capacity] = replace(
            rec,
            reward_target=reward_target,
            provenance=provenance or rec.provenance,
        )
        return True

    def get(self, ticket: int) -> TransitionRecord | None:
        if ticket < self._count - self.capacity or ticket >= self._count:
            return None
        return self._data[ticket % self.capacity]

    def sample(self, batch_size: int, rng: np.random.Generator) -> list:
        """Uniform sample without replacement within the batch."""
        if batch_size < 1:
            raise ValueError("batch_size must be positive")
        n = len(self._data)
        if n < batch_size:
            raise ValueError(f"buffer holds {n} < batch_size {batch_size}")
        idx = rng.choice(n, size=batch_size, replace=False)
        return [self._data[i] for i in idx]

    def records(self) -> list:
        return list(self._data)


@dataclass
class _Held:
    s: int
    a: int
    s_next: int
    r_imm: float
    epoch: int
    terminal: bool
    waiting: set
    collected: float = 0.0
    forced: bool = False


class MaturityBuffer:
    """Holds partial transitions until every one of their orders matured.

    The released reward target is immediate revenue plus the realized
    shock revenues; transitions without orders release immediately.
    """

    def __init__(self):
        self._held: dict = {}
        self._by_order: dict = {}
        self._next_key = 0

    @property
    def pending_count(self) -> int:
        return len(self._held)

    def admit(
        self,
        s: int,
        a: int,
        s_next: int,
        r_imm: float,
        order_ids,
        epoch: int,
        terminal: bool = False,
    ) -> list:
        """Hold one transition; returns released records (possibly itself)."""
        order_ids = tuple(order_ids)
        held = _Held(s, a, s_next, r_imm, epoch, terminal, waiting=set(order_ids))
        if not order_ids:
            return [self._release(held)]
        key = self._next_key
        self._next_key += 1
        self._held[key] = held
        for oid in order_ids:
            self._by_order[oid] = key
        return []

    def observe(self, order_id: int, shock_revenue: float, forced: bool = False) -> list:
        """Record one matured order; release any now-complete transition."""
        if order_id not in self._by_order:
            raise KeyError(f"unknown order id {order_id}")
        key = self._by_order.pop(order_id)
        held = self._held[key]
        held.waiting.discard(order_id)
        held.collected += shock_revenue
        held.forced = held.forced or forced
        if held.waiting:
            return []
        del self._held[key]
        return [self._release(held)]

    def _release(self, held: _Held) -> TransitionRecord:
        return TransitionRecord(
            s=held.s,
            a=held.a,
            reward_target=held.r_imm + held.collected,
            s_next=held.s_next,
            provenance="matured",
            epoch=held.epoch,
            terminal=held.terminal,
            forced=held.forced,
        )


def maturity_buffer_admit(buffer: MaturityBuffer, clock: int, matured_shocks) -> list:
    """Feed one epoch's matured shocks through the buffer.

    ``matured_shocks`` is the environment's list of (order, outcome,
    shock_revenue) plus an optional forced flag per entry; returns every
    transition completed at this clock tick.
    """
    released = []
    for entry in matured_shocks:
        order, _, revenue = entry[0], entry[1], entry[2]
        forced = bool(entry[3]) if len(entry) > 3 else order.matures_at > clock
        released.extend(buffer.observe(order.id, revenue, forced=forced))
    return released


def doubly_robust_target(r_imm: float, m: float, matured: bool, r_del: float | None = None) -> float:
    """Blend model expectation with the realized delayed reward.

    Matured decisions use the true delayed component (the model correction
    cancels); pending ones fall back to the model expectation.
    """
    if matured:
        if r_del is None:
            raise ValueError("matured target requires the realized delayed reward")
        return r_imm + r_del
    return r_imm + m


def impute_synthetic_transition(
    model: ChoiceModel,
    s: int,
    a: int,
    s_next: int,
    r_imm: float,
    new_orders,
    rng: np.random.Generator,
    epoch: int = 0,
    terminal: bool = False,
) -> TransitionRecord:
    """Sample each new order's shock from the fitted model at decision time.

    The record keeps the environment's actual next state; sampling the
    next state from the model as well is handled by the training loop's
    synthetic-next-state mode.
    """
    reward = r_imm
    ids = []
    for order in new_orders:
        _, revenue = model.sample_shock(order, rng)
        reward += revenue
        ids.append(order.id)
    return TransitionRecord(
        s=s,
        a=a,
        reward_target=reward,
        s_next=s_next,
        provenance="imputed",
        epoch=epoch,
        terminal=terminal,
        order_ids=tuple(ids),
    )
