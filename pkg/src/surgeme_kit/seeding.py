"""Deterministic RNG derivation.

Every stochastic component draws from a Generator derived from the master
seed plus a structured key (e.g. tree index, fold, ratio).  Results are
therefore independent of scheduling and worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEP = b"\x1f"


def derive_seed(*parts: object) -> int:
    """Hash a key path into a 64-bit seed, stable across platforms."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, float):
            token = repr(part)
        else:
            token = str(part)
        h.update(token.encode("utf-8"))
        h.update(_SEP)
    return int.from_bytes(h.digest()[:8], "little")


def derive_rng(*parts: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
