"""Ground-truth customer behavior families for the booking simulator.

Five families share one parameterization: a plain multinomial logit
(``mnl``), a two-level nested logit (``nested_logit``), a static two-segment
mixture (``bimodal_mixture``), a time-varying mixture (``dynamic_mixture``),
and an MNL with an extra quadratic price term (``quadratic_mnl``). Every
family produces a booking-choice distribution over room types plus an
outside option, and a shock-outcome distribution over
(keep, modify, cancel, no-show) for booked orders.

Utilities follow the convention ``V_j = demand_scale * intercept_j
- price_coef_j * (price_j / PRICE_SCALE) - comp_sens_j * competition_scale
* (price_j - comp_price) / PRICE_SCALE + weights_j . x``, with the outside
option pinned at utility zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

FAMILIES = ("mnl", "nested_logit", "bimodal_mixture", "dynamic_mixture", "quadratic_mnl")
SHOCK_OUTCOMES = ("keep", "modify", "cancel", "no_show")

KEEP, MODIFY, CANCEL, NO_SHOW = 0, 1, 2, 3

#: Prices enter utilities divided by this, keeping coefficients O(1).
PRICE_SCALE = 100.0

_REFERENCE_FILE = Path(__file__).parent / "data" / "reference_world.json"


def softmax(z: np.ndarray) -> np.ndarray:
    """Stable softmax along the last axis."""
    z = np.asarray(z, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_sum_exp(z: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(z, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(z - m), axis=axis))


@dataclass
class SegmentParams:
    """Parameters of one customer segment.

    ``booking`` has one row per room type: (intercept, price_coef,
    comp_sens, w_1..w_d). ``shock`` has one row per non-keep outcome:
    (intercept, price_coef, v_1..v_d). ``shock_nest_shift`` adds a
    per-outcome utility offset for orders in the premium nest and
    ``shock_nest_price`` a per-outcome coefficient on the premium order's
    discount depth (reference price minus booked price, in price-scale
    units); both are zero outside the nested-logit family. The interaction
    makes discount-booked premium rooms shock differently from full-price
    ones, which no additive price + covariate model can represent.
    """

    booking: np.ndarray
    shock: np.ndarray
    shock_nest_shift: np.ndarray = field(default_factory=lambda: np.zeros(3))
    shock_nest_price: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.booking = np.asarray(self.booking, dtype=float)
        self.shock = np.asarray(self.shock, dtype=float)
        self.shock_nest_shift = np.asarray(self.shock_nest_shift, dtype=float)
        self.shock_nest_price = np.asarray(self.shock_nest_price, dtype=float)
        if self.booking.ndim != 2 or self.shock.ndim != 2:
            raise ValueError("booking and shock parameter blocks must be 2-d")
        if self.shock.shape[0] != len(SHOCK_OUTCOMES) - 1:
            raise ValueError("shock block needs one row per non-keep outcome")

    @property
    def n_room_types(self) -> int:
        return self.booking.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.booking.shape[1] - 3

    def to_dict(self) -> dict:
        return {
            "booking": self.booking.tolist(),
            "shock": self.shock.tolist(),
            "shock_nest_shift": self.shock_nest_shift.tolist(),
            "shock_nest_price": self.shock_nest_price.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SegmentParams":
        return cls(
            booking=np.array(d["booking"], dtype=float),
            shock=np.array(d["shock"], dtype=float),
            shock_nest_shift=np.array(d.get("shock_nest_shift", [0.0, 0.0, 0.0]), dtype=float),
            shock_nest_price=np.array(d.get("shock_nest_price", [0.0, 0.0, 0.0]), dtype=float),
        )


@dataclass
class BehaviorSpec:
    """Tagged union selecting the true customer-behavior family.

    ``segments`` holds one SegmentParams for mnl / nested_logit /
    quadratic_mnl and two for the mixture families. ``nests`` partitions
    room-type indices; ``nest_lambdas`` are the per-nest correlation
    parameters in (0, 1]. ``beta2 <= 0`` is the quadratic price coefficient
    (per squared dollar) around ``ref_price``.
    """

    family: str
    segments: tuple
    nests: tuple = ((0, 1, 2), (3, 4, 5))
    nest_lambdas: tuple = (0.4, 0.4)
    segment_weights: tuple = (0.6, 0.4)
    period: int = 82
    beta2: float = 0.0
    ref_price: float = 625.0
    comp_price: float = 625.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if isinstance(self.segments, SegmentParams):
            self.segments = (self.segments,)
        self.segments = tuple(self.segments)
        if self.family in ("bimodal_mixture", "dynamic_mixture"):
            if len(self.segments) != 2:
                raise ValueError(f"{self.family} requires exactly two segments")
        elif len(self.segments) != 1:
            raise ValueError(f"{self.family} requires exactly one segment")
        if abs(sum(self.segment_weights) - 1.0) > 1e-12:
            raise ValueError("segment_weights must sum to 1")
        for lam in self.nest_lambdas:
            if not (0.0 < lam <= 1.0):
                raise ValueError("nest lambdas must lie in (0, 1]")
        if self.beta2 > 0.0:
            raise ValueError("beta2 must be <= 0")
        if self.period <= 0:
            raise ValueError("period must be positive")

    @property
    def n_room_types(self) -> int:
        return self.segments[0].n_room_types

    @property
    def feature_dim(self) -> int:
        return self.segments[0].feature_dim

    def segment_weight(self, epoch: int) -> float:
        """Weight of segment 1 at the given epoch (constant unless dynamic)."""
        if self.family == "dynamic_mixture":
            return 0.5 + 0.3 * np.sin(2.0 * np.pi * epoch / self.period)
        return self.segment_weights[0]

    def premium_mask(self) -> np.ndarray:
        """Boolean mask over room types marking the premium (last) nest."""
        mask = np.zeros(self.n_room_types, dtype=bool)
        for idx in self.nests[-1]:
            mask[idx] = True
        return mask

    def to_dict(self) -> dict:
        d = asdict(self)
        d["segments"] = [s.to_dict() for s in self.segments]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BehaviorSpec":
        d = dict(d)
        d["segments"] = tuple(SegmentParams.from_dict(s) for s in d["segments"])
        for key in ("nests",):
            if key in d:
                d[key] = tuple(tuple(n) for n in d[key])
        for key in ("nest_lambdas", "segment_weights"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "BehaviorSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def systematic_utilities(
    spec: BehaviorSpec,
    features: np.ndarray,
    prices: np.ndarray,
    demand_scale: float = 1.0,
    competition_scale: float = 1.0,
    segment: int = 0,
) -> np.ndarray:
    """Utility vector over all alternatives, index 0 = outside option (zero).

    ``prices`` are the dollar prices of the room types. The quadratic
    family adds ``beta2 * (price - ref_price)**2`` to each room utility.
    """
    theta = spec.segments[segment].booking
    features = np.asarray(features, dtype=float)
    prices = np.asarray(prices, dtype=float)
    if features.shape[-1] != spec.feature_dim:
        raise ValueError(
            f"feature dimension {features.shape[-1]} does not match spec ({spec.feature_dim})"
        )
    if prices.shape[-1] != spec.n_room_types:
        raise ValueError(
            f"price dimension {prices.shape[-1]} does not match spec ({spec.n_room_types})"
        )
    p = prices / PRICE_SCALE
    rel = (prices - spec.comp_price) / PRICE_SCALE
    v = (
        demand_scale * theta[:, 0]
        - theta[:, 1] * p
        - competition_scale * theta[:, 2] * rel
        + features @ theta[:, 3:].T
    )
    if spec.family == "quadratic_mnl":
        v = v + spec.beta2 * (prices - spec.ref_price) ** 2
    out = np.zeros(v.shape[:-1] + (spec.n_room_types + 1,))
    out[..., 1:] = v
    return out


def _segment_choice_probs(spec, features, prices, demand_scale, competition_scale, segment):
    """Choice probabilities of a single segment (nested for the nested family)."""
    util = systematic_utilities(spec, features, prices, demand_scale, competition_scale, segment)
    if spec.family != "nested_logit":
        return softmax(util)
    # Two-level nested logit; the outside option is its own degenerate nest.
    room_util = util[1:]
    nest_values = []
    nests = [(0,)] + [tuple(i + 1 for i in nest) for nest in spec.nests]
    lambdas = [1.0] + list(spec.nest_lambdas)
    logsums = []
    for members, lam in zip(nests, lambdas):
        scaled = np.array([util[m] / lam for m in members])
        logsums.append(log_sum_exp(scaled))
    # log of nest inclusive values raised to lambda
    log_nest_terms = np.array([lam * ls for lam, ls in zip(lambdas, logsums)])
    log_denom = log_sum_exp(log_nest_terms)
    probs = np.zeros(len(util))
    for k, (members, lam) in enumerate(zip(nests, lambdas)):
        log_p_nest = log_nest_terms[k] - log_denom
        for m in members:
            log_within = util[m] / lam - logsums[k]
            probs[m] = np.exp(log_p_nest + log_within)
    return probs


def choice_probabilities(
    spec: BehaviorSpec,
    features: np.ndarray,
    prices: np.ndarray,
    epoch: int = 0,
    demand_scale: float = 1.0,
    competition_scale: float = 1.0,
) -> np.ndarray:
    """Booking-choice distribution over (outside, room types).

    Mixture families convexly combine two MNL segments; the dynamic family
    uses the epoch-dependent weight 0.5 + 0.3 sin(2 pi epoch / period).
    """
    if spec.family in ("mnl", "quadratic_mnl", "nested_logit"):
        return _segment_choice_probs(spec, features, prices, demand_scale, competition_scale, 0)
    w1 = spec.segment_weight(epoch)
    p1 = _segment_choice_probs(spec, features, prices, demand_scale, competition_scale, 0)
    p2 = _segment_choice_probs(spec, features, prices, demand_scale, competition_scale, 1)
    return w1 * p1 + (1.0 - w1) * p2


def _segment_shock_probs(spec, features, booked_price, room_type, segment):
    seg = spec.segments[segment]
    theta = seg.shock
    u = (
        theta[:, 0]
        + theta[:, 1] * (booked_price / PRICE_SCALE)
        + theta[:, 2:] @ np.asarray(features, dtype=float)
    )
    if spec.family == "nested_logit" and spec.premium_mask()[room_type]:
        discount = (spec.ref_price - booked_price) / PRICE_SCALE
        u = u + seg.shock_nest_shift + seg.shock_nest_price * discount
    full = np.concatenate([[0.0], u])
    return softmax(full)


def shock_probabilities(spec: BehaviorSpec, order) -> np.ndarray:
    """Shock-outcome distribution (keep, modify, cancel, no-show) for an order.

    Keep is the normalized baseline. Mixtures blend per-segment shock
    models with the same weights as booking, evaluated at the order's
    creation epoch.
    """
    if spec.family in ("mnl", "quadratic_mnl", "nested_logit"):
        return _segment_shock_probs(spec, order.features, order.booked_price, order.room_type, 0)
    w1 = spec.segment_weight(order.created_at)
    p1 = _segment_shock_probs(spec, order.features, order.booked_price, order.room_type, 0)
    p2 = _segment_shock_probs(spec, order.features, order.booked_price, order.room_type, 1)
    return w1 * p1 + (1.0 - w1) * p2


def sample_outcome(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from a probability simplex."""
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or np.any(probs < -1e-12) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("probs must be a probability simplex")
    cdf = np.cumsum(probs)
    u = rng.random()
    return int(np.searchsorted(cdf, u, side="right").clip(0, len(probs) - 1))


def load_reference_world() -> dict:
    """Parameters of the shipped reference world, keyed by family name.

    Returns a dict with one BehaviorSpec per family plus the raw metadata
    block. The mixture and quadratic specs derive from the same base
    segment so that degenerate settings collapse to the plain MNL world.
    """
    raw = json.loads(_REFERENCE_FILE.read_text())
    base = SegmentParams.from_dict(raw["base_segment"])
    leisure = SegmentParams.from_dict(raw["leisure_segment"])
    nested_seg = SegmentParams.from_dict(raw["nested_segment"])
    common = dict(
        period=raw["period"],
        ref_price=raw["ref_price"],
        comp_price=raw["comp_price"],
    )
    specs = {
        "mnl": BehaviorSpec(family="mnl", segments=(base,), **common),
        "nested_logit": BehaviorSpec(
            family="nested_logit",
            segments=(nested_seg,),
            nests=tuple(tuple(n) for n in raw["nests"]),
            nest_lambdas=tuple(raw["nest_lambdas"]),
            **common,
        ),
        "bimodal_mixture": BehaviorSpec(
            family="bimodal_mixture",
            segments=(base, leisure),
            segment_weights=tuple(raw["segment_weights"]),
            **common,
        ),
        "dynamic_mixture": BehaviorSpec(
            family="dynamic_mixture",
            segments=(base, leisure),
            **common,
        ),
        "quadratic_mnl": BehaviorSpec(
            family="quadratic_mnl",
            segments=(base,),
            beta2=raw["beta2_default"],
            **common,
        ),
    }
    specs["meta"] = raw["meta"]
    return specs


def reference_spec(family: str = "mnl", beta2: float | None = None) -> BehaviorSpec:
    """Convenience accessor for one family of the reference world."""
    specs = load_reference_world()
    if family not in specs:
        raise ValueError(f"unknown family {family!r}")
    spec = specs[family]
    if beta2 is not None:
        if family != "quadratic_mnl":
            raise ValueError("beta2 override only applies to quadratic_mnl")
        spec = BehaviorSpec(
            family="quadratic_mnl",
            segments=spec.segments,
            beta2=beta2,
            period=spec.period,
            ref_price=spec.ref_price,
            comp_price=spec.comp_price,
        )
    return spec
