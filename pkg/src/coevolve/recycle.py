"""Turn scored rollout groups into judgment and reflection training tasks.

Every sample's label is the verifier's output on candidates that already
appear in the group, so no extra annotation is needed. Each recycled
sample is then re-expressed as a verifiable task for the same model:

* pointwise  -> JudgePoint, gold = the candidate's reward (Incorrect/Correct)
* pairwise   -> JudgePair,  gold = position of the reward-1 candidate
* reflect    -> Reflect,    gold = the original task's gold answer
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, ParameterError
from .policy import CORRECT, INCORRECT, Candidate, Mode, Prompt
from .rollout import RolloutGroup
from .tasks import Task, TaskSet


class Kind(str, Enum):
    POINTWISE = "pointwise"
    PAIRWISE = "pairwise"
    REFLECT = "reflect"


class Source(str, Enum):
    ANSWER = "answer"
    COT = "cot"


@dataclass(frozen=True)
class Provenance:
    task_id: str
    group_hash: str
    step: int

    def to_dict(self) -> dict:
        return {"task_id": self.task_id, "group_hash": self.group_hash, "step": self.step}


@dataclass(frozen=True)
class RecycledSample:
    kind: Kind
    source: Source
    task: Task
    candidates: tuple[Candidate, ...]
    members: tuple[int, ...]
    labels: tuple[int, ...]
    provenance: Provenance

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "source": self.source.value,
            "task_id": self.task.id,
            "candidates": [c.to_dict() for c in self.candidates],
            "members": list(self.members),
            "labels": list(self.labels),
            "provenance": self.provenance.to_dict(),
        }


@dataclass(frozen=True)
class MixConfig:
    pointwise: float = 1.0
    pairwise: float = 1.0
    reflect: float = 1.0

    def __post_init__(self):
        if min(self.pointwise, self.pairwise, self.reflect) < 0:
            raise ParameterError("mix ratios must be >= 0")

    def weights(self) -> tuple[float, float, float]:
        return (self.pointwise, self.pairwise, self.reflect)


@dataclass(frozen=True)
class RecycleConfig:
    """How rollouts are recycled each step.

    ``budget`` is the number of recycled tasks assembled per step, ``quota``
    how many queued tasks a step trains on, ``max_pairs`` the pairwise cap per
    group. ``None`` means ``2 * group_size``, ``budget`` and ``group_size``
    respectively. ``mode`` selects GRPO on the judgment tasks or a plain
    likelihood step towards their gold action. ``balance_pointwise`` draws
    the pointwise share evenly from both labels.
    """

    enabled: bool = True
    mix: MixConfig = field(default_factory=MixConfig)
    sources: tuple[Source, ...] = (Source.ANSWER, Source.COT)
    budget: int | None = None
    quota: int | None = None
    max_pairs: int | None = None
    mode: str = "grpo"
    balance_pointwise: bool = False

    def __post_init__(self):
        if self.mode not in ("grpo", "supervised"):
            raise ParameterError(f"recycle mode must be 'grpo' or 'supervised', got {self.mode!r}")
        for name in ("budget", "quota", "max_pairs"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ParameterError(f"{name} must be >= 0")
        if self.enabled and not self.sources:
            raise ParameterError("at least one recycle source is required")

    def resolved(self, group_size: int) -> tuple[int, int, int]:
        budget = 2 * group_size if self.budget is None else self.budget
        quota = budget if self.quota is None else self.quota
        max_pairs = group_size if self.max_pairs is None else self.max_pairs
        if not self.enabled:
            return 0, 0, max_pairs
        return budget, quota, max_pairs


def _provenance(group: RolloutGroup, step: int) -> Provenance:
    return Provenance(group.task.id, group.group_hash(), step)


def _source_labels(group: RolloutGroup, source: Source) -> list[int]:
    if source is Source.ANSWER:
        return group.rewards
    if group.cot_rewards is None:
        raise ContractError("cot-sourced recycling needs a solve group")
    return group.cot_rewards


def _candidate(group: RolloutGroup, i: int, source: Source) -> Candidate:
    s = group.samples[i]
    return Candidate(answer=s.answer_action) if source is Source.ANSWER else Candidate(cot=s.cot_action)


def build_pointwise(group: RolloutGroup, source: Source = Source.ANSWER, step: int = 0) -> list[RecycledSample]:
    source = Source(source)
    prov = _provenance(group, step)
    labels = _source_labels(group, source)
    return [
        RecycledSample(Kind.POINTWISE, source, group.task, (_candidate(group, i, source),), (i,), (labels[i],), prov)
        for i in range(group.n)
    ]


def build_pairwise(group: RolloutGroup, source: Source = Source.ANSWER, max_pairs: int = 8,
                   rng: np.random.Generator | None = None, step: int = 0) -> list[RecycledSample]:
    """Mixed pairs only (one reward-1, one reward-0 member), each in random order."""
    if max_pairs < 0:
        raise ParameterError("max_pairs must be >= 0")
    source = Source(source)
    rng = np.random.default_rng(0) if rng is None else rng
    labels = _source_labels(group, source)
    pairs = [
        (i, j) for i in range(group.n) for j in range(i + 1, group.n) if labels[i] != labels[j]
    ]
    if len(pairs) > max_pairs:
        keep = np.sort(rng.choice(len(pairs), size=max_pairs, replace=False))
        pairs = [pairs[k] for k in keep]
    prov = _provenance(group, step)
    out = []
    for i, j in pairs:
        if rng.random() < 0.5:
            i, j = j, i
        out.append(RecycledSample(
            Kind.PAIRWISE, source, group.task,
            (_candidate(group, i, source), _candidate(group, j, source)),
            (i, j), (labels[i], labels[j]), prov,
        ))
    return out


def build_reflect(group: RolloutGroup, step: int = 0) -> list[RecycledSample]:
    prov = _provenance(group, step)
    out = []
    for i, (s, r) in enumerate(zip(group.samples, group.rewards)):
        if r == 0:
            out.append(RecycledSample(
                Kind.REFLECT, Source.ANSWER, group.task,
                (Candidate(cot=s.cot_action, answer=s.answer_action),), (i,), (0,), prov,
            ))
    return out


@dataclass(frozen=True)
class RecycleBatch:
    samples: tuple[RecycledSample, ...]
    provenance: tuple[Provenance, ...]
    quotas: dict

    def counts(self) -> dict[str, int]:
        c = {k.value: 0 for k in Kind}
        for s in self.samples:
            c[s.kind.value] += 1
        return c

    def to_dict(self) -> dict:
        return {
            "provenance": [p.to_dict() for p in self.provenance],
            "quotas": dict(self.quotas),
            "counts": self.counts(),
            "samples": [s.to_dict() for s in self.samples],
        }


def split_budget(budget: int, weights: Sequence[float]) -> list[int]:
    """Largest-remainder split of an integer budget; ties go to the earlier kind."""
    total = float(sum(weights))
    if budget <= 0 or total <= 0:
        return [0] * len(weights)
    exact = [budget * w / total for w in weights]
    quotas = [int(np.floor(e)) for e in exact]
    order = sorted(range(len(weights)), key=lambda k: (-(exact[k] - quotas[k]), k))
    for k in order[: budget - sum(quotas)]:
        quotas[k] += 1
    return quotas


def _subsample(pool: Sequence, quota: int, rng: np.random.Generator) -> list:
    if len(pool) <= quota:
        return list(pool)
    keep = np.sort(rng.choice(len(pool), size=quota, replace=False))
    return [pool[k] for k in keep]


def _balanced_subsample(pool: Sequence[RecycledSample], quota: int, rng: np.random.Generator) -> list:
    if len(pool) <= quota:
        return list(pool)
    pos = [s for s in pool if s.labels[0] == 1]
    neg = [s for s in pool if s.labels[0] == 0]
    k_pos = min(len(pos), max(quota - len(neg), (quota + 1) // 2 if rng.random() < 0.5 else quota // 2))
    picked = set(map(id, _subsample(pos, k_pos, rng) + _subsample(neg, quota - k_pos, rng)))
    return [s for s in pool if id(s) in picked]


def assemble_on_policy(point: Sequence[RecycledSample], pair: Sequence[RecycledSample],
                       reflect: Sequence[RecycledSample], mix: MixConfig, rng: np.random.Generator,
                       budget: int, provenance: Iterable[Provenance] = (), balance: bool = False) -> RecycleBatch:
    """Subsample each kind to its share of ``budget``, concatenate and shuffle.

    With ``balance`` the pointwise share is drawn half from each label when
    both labels are available, topping up from the other label otherwise.
    """
    quotas = split_budget(budget, mix.weights())
    chosen: list[RecycledSample] = []
    for kind, pool, quota in zip(Kind, (point, pair, reflect), quotas):
        if balance and kind is Kind.POINTWISE:
            chosen.extend(_balanced_subsample(pool, quota, rng))
        else:
            chosen.extend(_subsample(pool, quota, rng))
    order = rng.permutation(len(chosen)) if chosen else []
    return RecycleBatch(
        tuple(chosen[k] for k in order),
        tuple(provenance),
        {k.value: q for k, q in zip(Kind, quotas)},
    )


def recycle_groups(groups: Sequence[RolloutGroup], config: RecycleConfig, group_size: int,
                   rng: np.random.Generator, step: int = 0) -> RecycleBatch:
    """Build all three kinds from a step's solve groups and assemble one batch."""
    budget, _, max_pairs = config.resolved(group_size)
    point, pair, refl = [], [], []
    for g in groups:
        if not g.is_solve:
            continue
        for src in config.sources:
            point.extend(build_pointwise(g, src, step))
            pair.extend(build_pairwise(g, src, max_pairs, rng, step))
        refl.extend(build_reflect(g, step))
    prov = [_provenance(g, step) for g in groups if g.is_solve]
    return assemble_on_policy(point, pair, refl, config.mix, rng, budget, prov, config.balance_pointwise)


@dataclass(frozen=True)
class JudgmentTask:
    """A recycled sample posed back to the model as a verifiable task."""

    id: str
    base: Task
    mode: Mode
    candidates: tuple[Candidate, ...]
    gold_answer: int
    kind: Kind
    source: Source

    gold_cot = None

    @property
    def family(self):
        return self.base.family

    def prompt(self) -> Prompt:
        return Prompt(self.base, self.mode, self.candidates)


def recycled_to_task(sample: RecycledSample, ordinal: int = 0) -> JudgmentTask:
    p = sample.provenance
    members = "-".join(str(m) for m in sample.members)
    tid = f"{p.task_id}#{sample.kind.value}.{sample.source.value}@{p.step}:{p.group_hash}:{members}:{ordinal}"
    if sample.kind is Kind.POINTWISE:
        gold = CORRECT if sample.labels[0] == 1 else INCORRECT
        mode = Mode.JUDGE_POINT
    elif sample.kind is Kind.PAIRWISE:
        if sample.labels[0] == sample.labels[1]:
            raise ContractError("pairwise sample with equal labels has no better candidate")
        gold = sample.labels.index(1)
        mode = Mode.JUDGE_PAIR
    else:
        gold = sample.task.gold_answer
        mode = Mode.REFLECT
    return JudgmentTask(tid, sample.task, mode, sample.candidates, gold, sample.kind, sample.source)


def recycled_to_tasks(batch: RecycleBatch) -> TaskSet:
    return TaskSet(tuple(recycled_to_task(s, k) for k, s in enumerate(batch.samples)))


class RecycleQueue:
    """FIFO of recycled tasks; appended by producers, drained by the trainer."""

    def __init__(self):
        self._items: deque = deque()

    def __len__(self) -> int:
        return len(self._items)

    def extend(self, tasks: Iterable[JudgmentTask]) -> None:
        self._items.extend(tasks)

    def drain(self, k: int) -> list[JudgmentTask]:
        return [self._items.popleft() for _ in range(min(k, len(self._items)))]


def dump_batches(batches: Iterable[RecycleBatch], fh) -> None:
    for b in batches:
        fh.write(json.dumps(b.to_dict(), sort_keys=True) + "\n")
