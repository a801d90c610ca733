"""One-hidden-layer tanh network with a softmax head per (family, mode).

The hidden layer is shared by every mode, which is what makes this a single
model acting as solver, judge and reflector at once.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ParameterError
from ..tasks import FamilyParams
from .base import ALL_MODES, GradientAccumulator, Mode, PolicyModel
from .encoding import PromptEncoder


# Features are multiplied by this constant before the first layer. Under
# plain gradient ascent it acts as a larger step size for W1 than for the
# heads, which speeds up learning of operand interactions.
INPUT_SCALE = 2.0


def head_name(family, mode) -> str:
    return f"{family.value}/{Mode(mode).value}"


class MlpPolicy(PolicyModel):
    kind = "mlp"

    def __init__(self, families: Sequence[FamilyParams], hidden_dim: int, modes=ALL_MODES, seed: int = 0,
                 input_scale: float = INPUT_SCALE):
        super().__init__(families, modes)
        if not isinstance(hidden_dim, int) or hidden_dim < 1:
            raise ParameterError(f"hidden_dim must be >= 1, got {hidden_dim!r}")
        self.hidden_dim = hidden_dim
        self.seed = int(seed)
        if not input_scale > 0:
            raise ParameterError(f"input_scale must be > 0, got {input_scale!r}")
        self.input_scale = float(input_scale)
        self.encoder = PromptEncoder(self.families.values())
        self.feature_dim = self.encoder.dim
        rng = np.random.default_rng(self.seed & 0xFFFFFFFFFFFFFFFF)
        self.params: dict[str, np.ndarray] = {
            "W1": rng.standard_normal((self.feature_dim, hidden_dim)) * (1.0 / np.sqrt(self.feature_dim)),
            "b1": np.zeros(hidden_dim),
        }
        for fam in self.families:
            for mode in self.modes:
                size = self.vocab_for(fam, mode).size
                name = head_name(fam, mode)
                self.params["W2:" + name] = rng.standard_normal((hidden_dim, size)) * (1.0 / np.sqrt(hidden_dim))
                self.params["b2:" + name] = np.zeros(size)

    def _forward(self, prompts):
        x = self.input_scale * self.encoder.encode_many(prompts)
        h = np.tanh(x @ self.params["W1"] + self.params["b1"])
        heads: dict[str, list[int]] = {}
        for i, p in enumerate(prompts):
            heads.setdefault(head_name(p.task.family, p.mode), []).append(i)
        return x, h, heads

    def logits_many(self, prompts):
        if not prompts:
            return []
        _, h, heads = self._forward(prompts)
        out: list = [None] * len(prompts)
        for name, idx in heads.items():
            z = h[idx] @ self.params["W2:" + name] + self.params["b2:" + name]
            for row, i in enumerate(idx):
                out[i] = z[row]
        return out

    def backprop_many(self, prompts, dlogits, acc: GradientAccumulator) -> None:
        if not prompts:
            return
        x, h, heads = self._forward(prompts)
        dh = np.zeros_like(h)
        for name, idx in heads.items():
            d = np.stack([dlogits[i] for i in idx])
            acc.add("W2:" + name, h[idx].T @ d)
            acc.add("b2:" + name, d.sum(axis=0))
            dh[idx] = d @ self.params["W2:" + name].T
        dpre = dh * (1.0 - h * h)
        acc.add("W1", x.T @ dpre)
        acc.add("b1", dpre.sum(axis=0))

    def _apply(self, acc: GradientAccumulator, step_size: float) -> None:
        for name in sorted(acc.grads):
            self.params[name] = self.params[name] + step_size * acc.grads[name]

    def _freeze(self) -> None:
        for v in self.params.values():
            v.setflags(write=False)

    def state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "families": [p.to_dict() for p in self.families.values()],
            "modes": [m.value for m in self.modes],
            "hidden_dim": self.hidden_dim,
            "seed": self.seed,
            "input_scale": self.input_scale,
            "params": {k: self.params[k].tolist() for k in sorted(self.params)},
        }

    @classmethod
    def from_state(cls, state: dict, families) -> "MlpPolicy":
        pol = cls(families, int(state["hidden_dim"]), [Mode(m) for m in state["modes"]], state["seed"],
                  float(state.get("input_scale", INPUT_SCALE)))
        for k, v in state["params"].items():
            if k not in pol.params:
                raise ParameterError(f"unexpected parameter {k!r} in checkpoint")
            arr = np.asarray(v, dtype=np.float64)
            if arr.shape != pol.params[k].shape:
                raise ParameterError(f"parameter {k!r} has shape {arr.shape}, expected {pol.params[k].shape}")
            pol.params[k] = arr
        return pol


def mlp_policy_new(families: Sequence[FamilyParams], hidden_dim: int, modes=ALL_MODES, seed: int = 0,
                   feature_dim: int | None = None, input_scale: float = INPUT_SCALE) -> MlpPolicy:
    """Build an MLP policy; ``feature_dim`` is only checked against the encoder."""
    pol = MlpPolicy(families, hidden_dim, modes, seed, input_scale)
    if feature_dim is not None and feature_dim != pol.feature_dim:
        raise ParameterError(f"feature_dim {feature_dim} != encoder dimension {pol.feature_dim}")
    return pol
