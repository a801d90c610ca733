"""Prompt types, distributions and the policy contract.

A policy maps a structured prompt to a categorical distribution over the
action vocabulary of the prompt's mode. Concrete policies only implement
batched logits and batched backpropagation of logit-space gradients; score
function and KL gradients are built here on top of those two primitives.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from ..errors import ContractError, NumericError, ParameterError
from ..tasks import Family, FamilyParams, Task, ValueRange, params_from_dict


class Mode(str, Enum):
    SOLVE_COT = "solve_cot"
    SOLVE_ANSWER = "solve_answer"
    JUDGE_POINT = "judge_point"
    JUDGE_PAIR = "judge_pair"
    REFLECT = "reflect"


ALL_MODES = tuple(Mode)

INCORRECT, CORRECT = 0, 1
FIRST, SECOND = 0, 1

_BINARY = ValueRange(0, 2)
_ARITY = {
    Mode.SOLVE_COT: 0,
    Mode.SOLVE_ANSWER: 1,
    Mode.JUDGE_POINT: 1,
    Mode.JUDGE_PAIR: 2,
    Mode.REFLECT: 1,
}


@dataclass(frozen=True)
class Candidate:
    """A (possibly partial) generation shown to the model inside a prompt."""

    cot: int | None = None
    answer: int | None = None

    def __post_init__(self):
        if self.cot is None and self.answer is None:
            raise ContractError("candidate must carry a cot, an answer, or both")

    def key(self) -> str:
        c = "-" if self.cot is None else self.cot
        a = "-" if self.answer is None else self.answer
        return f"c={c};a={a}"

    def to_dict(self) -> dict:
        return {"cot": self.cot, "answer": self.answer}


@dataclass(frozen=True)
class Prompt:
    """Structured prompt: the task, a mode, and the candidates embedded in it.

    SolveAnswer embeds the sampled CoT, JudgePoint and Reflect one candidate,
    JudgePair two (in presentation order).
    """

    task: Task
    mode: Mode
    candidates: tuple[Candidate, ...] = ()

    def __post_init__(self):
        want = _ARITY[self.mode]
        if len(self.candidates) != want:
            raise ContractError(
                f"{self.mode.value} prompt needs {want} candidate(s), got {len(self.candidates)}"
            )
        if self.mode is Mode.SOLVE_ANSWER and (
            self.candidates[0].cot is None or self.candidates[0].answer is not None
        ):
            raise ContractError("solve_answer prompt embeds exactly the sampled cot")

    def context_key(self) -> str:
        """Gold-free identity of the prompt; the task id is deliberately excluded."""
        q = self.question_key()
        cands = "|".join(c.key() for c in self.candidates)
        return f"{self.task.family.value}|{q}|{self.mode.value}|{cands}"

    def question_key(self) -> str:
        q = self.task.question
        if self.task.family is Family.MOD_ARITH:
            return f"{q.a},{q.b},{q.op},{q.modulus}"
        return ",".join(str(v) for v in q.values)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    return z - np.log(np.exp(z).sum())


@dataclass(frozen=True, eq=False)
class ActionDistribution:
    logits: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.logits)):
            raise NumericError("non-finite logits")

    @property
    def log_probabilities(self) -> np.ndarray:
        return log_softmax(self.logits)

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_probabilities)

    def __len__(self) -> int:
        return len(self.logits)


class GradientAccumulator:
    """Additive per-parameter gradient buffer.

    Entries are created on first use, so accumulators for tabular policies stay
    sparse. Accumulation order is the caller's responsibility when bitwise
    reproducibility matters.
    """

    def __init__(self):
        self.grads: dict[str, np.ndarray] = {}
        self.sample_count = 0

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self.grads:
            self.grads[name] += value
        else:
            self.grads[name] = np.array(value, dtype=np.float64, copy=True)

    def merge(self, other: "GradientAccumulator") -> None:
        for name in other.grads:
            self.add(name, other.grads[name])
        self.sample_count += other.sample_count

    def scaled(self, factor: float) -> "GradientAccumulator":
        out = GradientAccumulator()
        for name, g in self.grads.items():
            out.grads[name] = g * factor
        out.sample_count = self.sample_count
        return out

    def is_zero(self) -> bool:
        return all(not np.any(g) for g in self.grads.values())

    def max_abs(self) -> float:
        return max((float(np.abs(g).max()) for g in self.grads.values() if g.size), default=0.0)


class PolicyModel:
    """Base class for the unified policy / judge / reflector model."""

    kind = "abstract"

    def __init__(self, families: Sequence[FamilyParams], modes: Iterable[Mode] = ALL_MODES):
        self.families: dict[Family, FamilyParams] = {}
        for p in families:
            if p.family in self.families:
                raise ParameterError(f"family {p.family.value} configured twice")
            self.families[p.family] = p
        if not self.families:
            raise ParameterError("policy needs at least one task family")
        self.modes = tuple(Mode(m) for m in modes)
        self.frozen = False

    # -- vocabulary -----------------------------------------------------
    def vocab_for(self, family: Family, mode: Mode) -> ValueRange:
        params = self.families[family]
        if mode is Mode.SOLVE_COT:
            return params.cot_range
        if mode in (Mode.SOLVE_ANSWER, Mode.REFLECT):
            return params.answer_range
        return _BINARY

    def vocab(self, prompt: Prompt) -> ValueRange:
        return self.vocab_for(prompt.task.family, prompt.mode)

    def check_prompt(self, prompt: Prompt) -> None:
        if prompt.mode not in self.modes:
            raise ContractError(f"mode {prompt.mode.value} not served by this policy")
        params = self.families.get(prompt.task.family)
        if params is None:
            raise ContractError(f"family {prompt.task.family.value} not served by this policy")
        if not params.accepts(prompt.task.question):
            raise ContractError(f"task {prompt.task.id} does not match policy family params {params}")
        for cand in prompt.candidates:
            if cand.cot is not None and cand.cot not in params.cot_range:
                raise ContractError(f"candidate cot {cand.cot} outside vocabulary")
            if cand.answer is not None and cand.answer not in params.answer_range:
                raise ContractError(f"candidate answer {cand.answer} outside vocabulary")

    # -- primitives implemented by subclasses ----------------------------
    def logits_many(self, prompts: Sequence[Prompt]) -> list[np.ndarray]:
        raise NotImplementedError

    def backprop_many(self, prompts: Sequence[Prompt], dlogits: Sequence[np.ndarray], acc: GradientAccumulator) -> None:
        """Add ``sum_i J_i^T dlogits_i`` to ``acc``, J_i = d logits(prompt_i) / d params."""
        raise NotImplementedError

    def _apply(self, acc: GradientAccumulator, step_size: float) -> None:
        raise NotImplementedError

    def state_dict(self) -> dict:
        raise NotImplementedError

    # -- shared conveniences -------------------------------------------
    def distributions(self, prompts: Sequence[Prompt]) -> list[ActionDistribution]:
        return [ActionDistribution(z) for z in self.logits_many(prompts)]

    def frozen_copy(self) -> "PolicyModel":
        clone = copy.deepcopy(self)
        clone.frozen = True
        clone._freeze()
        return clone

    def _freeze(self) -> None:
        pass

    def fingerprint(self) -> str:
        blob = json.dumps(self.state_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


class ReferencePolicy:
    """Read-only snapshot of a policy's parameters (the KL anchor)."""

    def __init__(self, policy: PolicyModel):
        self._policy = policy.frozen_copy()

    @property
    def families(self):
        return self._policy.families

    @property
    def modes(self):
        return self._policy.modes

    def vocab(self, prompt: Prompt) -> ValueRange:
        return self._policy.vocab(prompt)

    def check_prompt(self, prompt: Prompt) -> None:
        self._policy.check_prompt(prompt)

    def logits_many(self, prompts):
        return self._policy.logits_many(prompts)

    def distributions(self, prompts):
        return self._policy.distributions(prompts)

    def state_dict(self) -> dict:
        return self._policy.state_dict()

    def fingerprint(self) -> str:
        return self._policy.fingerprint()


def action_distribution(policy, prompt: Prompt) -> ActionDistribution:
    policy.check_prompt(prompt)
    return ActionDistribution(policy.logits_many([prompt])[0])


def log_prob(policy, prompt: Prompt, action: int) -> float:
    return float(action_distribution(policy, prompt).log_probabilities[action])


def draw_index(probabilities: np.ndarray, u: float) -> int:
    """Inverse-CDF draw; consumes exactly one uniform regardless of the distribution."""
    cdf = np.cumsum(probabilities)
    return int(min(np.searchsorted(cdf, u * cdf[-1], side="right"), len(cdf) - 1))


def sample_action(policy, prompt: Prompt, rng: np.random.Generator) -> tuple[int, float]:
    dist = action_distribution(policy, prompt)
    logp = dist.log_probabilities
    a = draw_index(np.exp(logp), rng.random())
    return a, float(logp[a])


def score_logit_grad(logits: np.ndarray, action: int, scale: float = 1.0) -> np.ndarray:
    """``scale * d log softmax(logits)[action] / d logits``."""
    g = -np.exp(log_softmax(logits))
    g[action] += 1.0
    return scale * g


def kl_from_logits(p_logits: np.ndarray, q_logits: np.ndarray) -> float:
    lp, lq = log_softmax(p_logits), log_softmax(q_logits)
    return float(np.sum(np.exp(lp) * (lp - lq)))


def kl_logit_grad(p_logits: np.ndarray, q_logits: np.ndarray) -> np.ndarray:
    """Gradient of KL(softmax(p) || softmax(q)) with respect to ``p_logits``."""
    lp, lq = log_softmax(p_logits), log_softmax(q_logits)
    p = np.exp(lp)
    kl = np.sum(p * (lp - lq))
    return p * (lp - lq - kl)


def grad_log_prob(policy, prompt: Prompt, action: int, scale: float = 1.0,
                  acc: GradientAccumulator | None = None) -> GradientAccumulator:
    """Add ``scale * grad log pi(action | prompt)`` into ``acc`` (a fresh one if omitted)."""
    acc = GradientAccumulator() if acc is None else acc
    dist = action_distribution(policy, prompt)
    if not 0 <= action < len(dist):
        raise ContractError(f"action {action} outside vocabulary of size {len(dist)}")
    if scale != 0.0:
        policy.backprop_many([prompt], [score_logit_grad(dist.logits, action, scale)], acc)
    acc.sample_count += 1
    return acc


def kl_to_reference(policy, ref, prompt: Prompt) -> float:
    policy.check_prompt(prompt)
    p = policy.logits_many([prompt])[0]
    q = ref.logits_many([prompt])[0]
    if p.shape != q.shape:
        raise ContractError("policy and reference vocabularies differ")
    return kl_from_logits(p, q)


def apply_gradient(policy: PolicyModel, acc: GradientAccumulator, step_size: float) -> PolicyModel:
    """Plain gradient ascent ``theta += step_size * acc``; atomic on failure."""
    if not step_size > 0:
        raise ParameterError(f"step_size must be > 0, got {step_size}")
    if policy.frozen:
        raise ContractError("cannot update a frozen reference policy")
    for name, g in acc.grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient entry in {name}")
    policy._apply(acc, step_size)
    return policy


def snapshot_reference(policy: PolicyModel) -> ReferencePolicy:
    return ReferencePolicy(policy)


def families_to_dicts(families) -> list[dict]:
    return [p.to_dict() for p in families.values()]


def families_from_dicts(ds) -> list[FamilyParams]:
    return [params_from_dict(d) for d in ds]
