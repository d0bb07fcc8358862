"""Deterministic seed derivation for independent runs and episodes."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary hashable parts.

    Uses a content hash rather than Python's salted ``hash`` so that runs
    reproduce across processes and execution order.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def rng_for(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
