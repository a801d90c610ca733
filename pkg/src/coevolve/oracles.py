"""Policy wrappers that replace some modes with fixed or ground-truth behaviour.

They exist for controlled experiments: an oracle judge isolates the value of
reflection from judge quality, a constant judge reproduces "always accept"
or "always reject" baselines. Overridden modes get degenerate
distributions, so sampling still consumes exactly one uniform per action and
traces stay paired with those of the wrapped policy.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .policy import Mode, Prompt
from .verifier import verify_answer, verify_cot

_LOW = -1e9


def _onehot_logits(size: int, index: int) -> np.ndarray:
    z = np.full(size, _LOW)
    z[index] = 0.0
    return z


class ModeOverride:
    """Delegates to ``policy`` except for modes listed in ``rules``.

    ``rules`` maps a mode to ``fn(prompt) -> action index``.
    """

    def __init__(self, policy, rules: dict[Mode, Callable[[Prompt], int]]):
        self.policy = policy
        self.rules = dict(rules)

    def __getattr__(self, name):
        return getattr(self.policy, name)

    def logits_many(self, prompts):
        out: list = [None] * len(prompts)
        passthrough = [i for i, p in enumerate(prompts) if p.mode not in self.rules]
        for i, z in zip(passthrough, self.policy.logits_many([prompts[i] for i in passthrough])):
            out[i] = z
        for i, p in enumerate(prompts):
            if out[i] is None:
                out[i] = _onehot_logits(self.policy.vocab(p).size, self.rules[p.mode](p))
        return out


def true_verdict(prompt: Prompt) -> int:
    cand = prompt.candidates[0]
    if cand.answer is not None:
        return verify_answer(cand.answer, prompt.task)
    return verify_cot(cand.cot, prompt.task)


def oracle_judge(policy) -> ModeOverride:
    return ModeOverride(policy, {Mode.JUDGE_POINT: true_verdict})


def oracle_judge_and_reflect(policy) -> ModeOverride:
    def gold(prompt: Prompt) -> int:
        return policy.vocab(prompt).to_index(prompt.task.gold_answer)

    return ModeOverride(policy, {Mode.JUDGE_POINT: true_verdict, Mode.REFLECT: gold})


def constant_judge(policy, verdict: int) -> ModeOverride:
    return ModeOverride(policy, {Mode.JUDGE_POINT: lambda _p: verdict})
