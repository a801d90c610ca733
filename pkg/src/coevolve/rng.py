"""Independent, reproducible random streams keyed by strings."""

from __future__ import annotations

import hashlib

import numpy as np


def _word(label) -> int:
    return int.from_bytes(hashlib.blake2b(str(label).encode(), digest_size=8).digest(), "little")


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """Stream determined only by ``seed`` and ``labels`` (e.g. a step index and task id)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_word(x) for x in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))
