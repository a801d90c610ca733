"""Answer-group sampling and scoring.

A solve group draws, for each of ``n`` members, a CoT action and then an
answer action conditioned on that CoT, and scores both with the verifier.
Judgment tasks produced by recycling are single-action tasks and go through
the same function with one stage.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .policy import Candidate, Mode, Prompt, draw_index, log_softmax
from .tasks import Task
from .verifier import verify_answer, verify_cot

DEFAULT_GROUP_SIZE = 8


@dataclass(frozen=True)
class RolloutSample:
    cot_action: int | None
    answer_action: int
    cot_log_prob: float | None
    answer_log_prob: float

    def to_dict(self) -> dict:
        return {
            "cot_action": self.cot_action,
            "answer_action": self.answer_action,
            "cot_log_prob": self.cot_log_prob,
            "answer_log_prob": self.answer_log_prob,
        }


@dataclass
class RolloutGroup:
    """``n`` scored samples for one task, in sampling order.

    For judgment tasks ``answer_action`` holds the verdict / choice /
    revised answer and ``cot_rewards`` is ``None``.
    """

    task: object
    samples: list[RolloutSample]
    rewards: list[int]
    cot_rewards: list[int] | None

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def is_solve(self) -> bool:
        return isinstance(self.task, Task)

    def cot_prompt(self) -> Prompt:
        return Prompt(self.task, Mode.SOLVE_COT)

    def answer_prompt(self, i: int) -> Prompt:
        return Prompt(self.task, Mode.SOLVE_ANSWER, (Candidate(cot=self.samples[i].cot_action),))

    def to_dict(self) -> dict:
        return {
            "task_id": self.task.id,
            "samples": [s.to_dict() for s in self.samples],
            "rewards": list(self.rewards),
            "cot_rewards": None if self.cot_rewards is None else list(self.cot_rewards),
        }

    def group_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _solve_stage_two(policy, tasks, cot_values, u2):
    prompts, index = [], {}
    for t, cots in zip(tasks, cot_values):
        for c in cots:
            p = Prompt(t, Mode.SOLVE_ANSWER, (Candidate(cot=c),))
            key = (t.id, c)
            if key not in index:
                index[key] = len(prompts)
                prompts.append(p)
    logps = [log_softmax(z) for z in policy.logits_many(prompts)]
    out = []
    for t, cots, u in zip(tasks, cot_values, u2):
        vocab = policy.vocab_for(t.family, Mode.SOLVE_ANSWER)
        picks = []
        for c, ui in zip(cots, u):
            lp = logps[index[(t.id, c)]]
            a = draw_index(np.exp(lp), ui)
            picks.append((vocab.to_value(a), float(lp[a])))
        out.append(picks)
    return out


def sample_groups(policy, tasks: Sequence, n: int, rngs: Sequence[np.random.Generator]) -> list[RolloutGroup]:
    """Sample one group per task, batching the policy evaluations.

    Each group consumes its own stream exactly as repeated
    :func:`~coevolve.policy.sample_action` calls would (CoT draw, then answer
    draw, per member), so results do not depend on how tasks are batched.
    """
    if not isinstance(n, int) or n < 2:
        raise ParameterError(f"group size must be >= 2, got {n!r}")
    solve = [i for i, t in enumerate(tasks) if isinstance(t, Task)]
    judge = [i for i, t in enumerate(tasks) if not isinstance(t, Task)]
    groups: list = [None] * len(tasks)

    if solve:
        s_tasks = [tasks[i] for i in solve]
        first = [Prompt(t, Mode.SOLVE_COT) for t in s_tasks]
        for p in first:
            policy.check_prompt(p)
        draws = [rngs[i].random((n, 2)) for i in solve]
        cot_logps = [log_softmax(z) for z in policy.logits_many(first)]
        cot_values, cot_lps = [], []
        for t, lp, u in zip(s_tasks, cot_logps, draws):
            vocab = policy.vocab_for(t.family, Mode.SOLVE_COT)
            idx = [draw_index(np.exp(lp), ui) for ui in u[:, 0]]
            cot_values.append([vocab.to_value(a) for a in idx])
            cot_lps.append([float(lp[a]) for a in idx])
        answers = _solve_stage_two(policy, s_tasks, cot_values, [u[:, 1] for u in draws])
        for j, i in enumerate(solve):
            t = s_tasks[j]
            samples = [
                RolloutSample(c, a, clp, alp)
                for c, clp, (a, alp) in zip(cot_values[j], cot_lps[j], answers[j])
            ]
            groups[i] = RolloutGroup(
                t,
                samples,
                [verify_answer(s.answer_action, t) for s in samples],
                [verify_cot(s.cot_action, t) for s in samples],
            )

    if judge:
        prompts = [tasks[i].prompt() for i in judge]
        for p in prompts:
            policy.check_prompt(p)
        logps = [log_softmax(z) for z in policy.logits_many(prompts)]
        for i, p, lp in zip(judge, prompts, logps):
            vocab = policy.vocab(p)
            u = rngs[i].random(n)
            idx = [draw_index(np.exp(lp), ui) for ui in u]
            samples = [RolloutSample(None, vocab.to_value(a), None, float(lp[a])) for a in idx]
            groups[i] = RolloutGroup(
                tasks[i], samples, [verify_answer(s.answer_action, tasks[i]) for s in samples], None
            )
    return groups


def sample_group(policy, task, n: int, rng: np.random.Generator) -> RolloutGroup:
    return sample_groups(policy, [task], n, [rng])[0]


def dump_groups(groups, fh) -> None:
    for g in groups:
        fh.write(json.dumps(g.to_dict(), sort_keys=True) + "\n")
