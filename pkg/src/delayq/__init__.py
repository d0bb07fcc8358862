"""Delayed-feedback revenue-management laboratory.

A calibratable booking simulator, an MNL choice model with Newton MLE,
learning agents that differ only in how delayed rewards enter the target,
oracle-based theory checks, and a statistical benchmark harness.
"""

__version__ = "0.1.0"

from .behavior import BehaviorSpec, SegmentParams, reference_spec  # noqa: F401
from .env import EnvConfig, Order, SimState, StepOutcome, reset, step  # noqa: F401
