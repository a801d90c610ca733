"""Tabular softmax policy: one free logit row per (prompt context, mode)."""

from __future__ import annotations

import hashlib
from types import MappingProxyType
from typing import Sequence

import numpy as np

from ..errors import ParameterError
from ..tasks import FamilyParams
from .base import ALL_MODES, GradientAccumulator, Mode, PolicyModel, Prompt


def _key_seed(seed: int, key: str) -> list[int]:
    digest = hashlib.blake2b(key.encode(), digest_size=16).digest()
    return [seed & 0xFFFFFFFFFFFFFFFF, int.from_bytes(digest, "little")]


class TabularPolicy(PolicyModel):
    """Rows are created lazily.

    A row that was never updated is recomputed from ``(seed, context key)``,
    so only touched rows are stored and snapshots stay exact.
    """

    kind = "tabular"

    def __init__(self, families: Sequence[FamilyParams], modes=ALL_MODES,
                 init_scale: float = 0.0, seed: int = 0):
        super().__init__(families, modes)
        if not init_scale >= 0:
            raise ParameterError(f"init noise scale must be >= 0, got {init_scale}")
        self.init_scale = float(init_scale)
        self.seed = int(seed)
        self.rows: dict[str, np.ndarray] = {}

    def _initial_row(self, key: str, size: int) -> np.ndarray:
        if self.init_scale == 0.0:
            return np.zeros(size)
        rng = np.random.default_rng(_key_seed(self.seed, key))
        return self.init_scale * rng.standard_normal(size)

    def row(self, prompt: Prompt) -> np.ndarray:
        key = prompt.context_key()
        r = self.rows.get(key)
        if r is None:
            r = self._initial_row(key, self.vocab(prompt).size)
        return r

    def logits_many(self, prompts):
        return [self.row(p).copy() for p in prompts]

    def backprop_many(self, prompts, dlogits, acc: GradientAccumulator) -> None:
        for p, g in zip(prompts, dlogits):
            acc.add(p.context_key(), g)

    def _apply(self, acc: GradientAccumulator, step_size: float) -> None:
        for key in sorted(acc.grads):
            g = acc.grads[key]
            current = self.rows.get(key)
            if current is None:
                current = self._initial_row(key, len(g))
            self.rows[key] = current + step_size * g

    def _freeze(self) -> None:
        for r in self.rows.values():
            r.setflags(write=False)
        self.rows = MappingProxyType(dict(self.rows))

    def state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "families": [p.to_dict() for p in self.families.values()],
            "modes": [m.value for m in self.modes],
            "init_scale": self.init_scale,
            "seed": self.seed,
            "params": {k: self.rows[k].tolist() for k in sorted(self.rows)},
        }

    @classmethod
    def from_state(cls, state: dict, families) -> "TabularPolicy":
        pol = cls(families, [Mode(m) for m in state["modes"]], state["init_scale"], state["seed"])
        pol.rows = {k: np.asarray(v, dtype=np.float64) for k, v in state["params"].items()}
        return pol


def tabular_policy_new(families: Sequence[FamilyParams], modes=ALL_MODES, init: str = "uniform",
                       scale: float = 0.0, seed: int = 0) -> TabularPolicy:
    """``init`` is ``"uniform"`` or ``"noise"`` (seeded Gaussian logits of std ``scale``)."""
    if init == "uniform":
        return TabularPolicy(families, modes, 0.0, seed)
    if init == "noise":
        return TabularPolicy(families, modes, scale, seed)
    raise ParameterError(f"unknown init {init!r}")
