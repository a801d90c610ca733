"""Group-standardized advantages and the KL-regularized policy-gradient step.

The estimator is REINFORCE with group-normalized advantages:

    g = sum_i A_i * grad log pi(o_i | q)  -  lambda * grad KL(pi(.|q) || pi_ref(.|q))

Samples are used once and on-policy, so no importance ratio or clipping is
involved. The KL gradient is exact (discrete distributions) and evaluated
at every prompt a group visited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractError, ParameterError
from .policy import (
    GradientAccumulator,
    Prompt,
    apply_gradient,
    kl_from_logits,
    kl_logit_grad,
    log_softmax,
    snapshot_reference,
)
from .recycle import RecycleConfig, RecycleQueue, recycle_groups, recycled_to_tasks
from .rng import derive_rng
from .rollout import DEFAULT_GROUP_SIZE, RolloutGroup, sample_groups

DEFAULT_EPSILON = 1e-6
DEFAULT_KL_COEF = 0.01


@dataclass(frozen=True)
class AdvantageSet:
    values: tuple[float, ...]
    mean_reward: float
    std: float
    epsilon: float

    def __len__(self) -> int:
        return len(self.values)


def compute_advantages(rewards: Sequence[float], epsilon: float = DEFAULT_EPSILON) -> AdvantageSet:
    """``A_i = (r_i - mean) / sqrt(var + eps)`` with the population (1/n) variance."""
    if len(rewards) < 2:
        raise ParameterError(f"need at least 2 rewards, got {len(rewards)}")
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be > 0, got {epsilon}")
    r = np.asarray(rewards, dtype=np.float64)
    mean = r.mean()
    std = math.sqrt(float(np.mean((r - mean) ** 2)) + epsilon)
    return AdvantageSet(tuple(((r - mean) / std).tolist()), float(mean), std, float(epsilon))


def _group_terms(group: RolloutGroup, adv: AdvantageSet, policy):
    """Score-function terms ``(prompt, action index, weight)`` and the prompts visited."""
    if len(adv) != group.n:
        raise ContractError(f"advantage length {len(adv)} != group size {group.n}")
    terms, visited = [], []
    if group.is_solve:
        first = group.cot_prompt()
        visited.append(first)
        cot_vocab = policy.vocab(first)
        seen = set()
        for i, s in enumerate(group.samples):
            p = group.answer_prompt(i)
            if s.cot_action not in seen:
                seen.add(s.cot_action)
                visited.append(p)
            terms.append((first, cot_vocab.to_index(s.cot_action), adv.values[i]))
            terms.append((p, policy.vocab(p).to_index(s.answer_action), adv.values[i]))
    else:
        p = group.task.prompt()
        visited.append(p)
        vocab = policy.vocab(p)
        for i, s in enumerate(group.samples):
            terms.append((p, vocab.to_index(s.answer_action), adv.values[i]))
    return terms, visited


def _accumulate(policy, ref, terms, kl_prompts, kl_coef: float, acc: GradientAccumulator,
                kl_values: list | None = None) -> GradientAccumulator:
    """Fold score and KL terms into per-prompt logit gradients and backprop once."""
    index: dict[Prompt, int] = {}
    prompts: list[Prompt] = []
    for p, _, _ in terms:
        if p not in index:
            index[p] = len(prompts)
            prompts.append(p)
    for p in kl_prompts:
        if p not in index:
            index[p] = len(prompts)
            prompts.append(p)
    if not prompts:
        return acc
    logits = policy.logits_many(prompts)
    dlogits = [np.zeros_like(z) for z in logits]
    probs = [np.exp(log_softmax(z)) for z in logits]
    for p, a, w in terms:
        if w == 0.0:
            continue
        k = index[p]
        dlogits[k] -= w * probs[k]
        dlogits[k][a] += w
    if kl_prompts and (kl_coef != 0.0 or kl_values is not None):
        ref_logits = ref.logits_many(kl_prompts)
        for p, q in zip(kl_prompts, ref_logits):
            k = index[p]
            if kl_values is not None:
                kl_values.append(kl_from_logits(logits[k], q))
            if kl_coef != 0.0:
                dlogits[k] -= kl_coef * kl_logit_grad(logits[k], q)
    live = [k for k in range(len(prompts)) if np.any(dlogits[k])]
    if live:
        policy.backprop_many([prompts[k] for k in live], [dlogits[k] for k in live], acc)
    acc.sample_count += len(terms)
    return acc


def group_gradient(group: RolloutGroup, adv: AdvantageSet, policy, ref, kl_coef: float = DEFAULT_KL_COEF,
                   acc: GradientAccumulator | None = None) -> GradientAccumulator:
    """Ascent direction for one group: advantage-weighted scores minus the KL pull."""
    if kl_coef < 0:
        raise ParameterError("kl coefficient must be >= 0")
    acc = GradientAccumulator() if acc is None else acc
    terms, visited = _group_terms(group, adv, policy)
    return _accumulate(policy, ref, terms, visited, kl_coef, acc)


@dataclass
class TrainConfig:
    group_size: int = DEFAULT_GROUP_SIZE
    epsilon: float = DEFAULT_EPSILON
    kl_coef: float = DEFAULT_KL_COEF
    step_size: float = 0.1
    seed: int = 0
    ref_refresh: int = 0
    recycle: RecycleConfig = field(default_factory=RecycleConfig)

    def __post_init__(self):
        if self.group_size < 2:
            raise ParameterError("group_size must be >= 2")
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be > 0")
        if self.kl_coef < 0:
            raise ParameterError("kl_coef must be >= 0")
        if not self.step_size > 0:
            raise ParameterError("step_size must be > 0")
        if self.ref_refresh < 0:
            raise ParameterError("ref_refresh must be >= 0")


@dataclass
class StepReport:
    step_index: int
    mean_reward: float
    mean_advantage_abs: float
    kl_value: float
    objective_estimate: float
    recycled_counts: dict
    judge_reward: float
    queue_length: int

    def to_dict(self) -> dict:
        return {
            "step": self.step_index,
            "mean_reward": self.mean_reward,
            "mean_advantage_abs": self.mean_advantage_abs,
            "kl": self.kl_value,
            "objective": self.objective_estimate,
            "recycled_counts": dict(self.recycled_counts),
            "judge_reward": self.judge_reward,
            "queue_length": self.queue_length,
        }


def _mean(xs) -> float:
    xs = list(xs)
    return float(np.mean(xs)) if xs else 0.0


def train_step(policy, ref, batch: Sequence, config: TrainConfig, step_index: int = 0,
               queue: RecycleQueue | None = None) -> StepReport:
    """One on-policy update over ``batch`` plus up to ``quota`` queued recycled tasks.

    Order: sample and score the solve groups; recycle them into the queue;
    drain the queue; sample and score the drained judgment tasks with the
    same (not yet updated) policy; accumulate everything in batch order; take
    a single gradient step.
    """
    if not batch:
        raise ParameterError("batch must be non-empty")
    n = config.group_size
    queue = RecycleQueue() if queue is None else queue
    rngs = [derive_rng(config.seed, "rollout", step_index, j, t.id) for j, t in enumerate(batch)]
    groups = sample_groups(policy, batch, n, rngs)
    advs = [compute_advantages(g.rewards, config.epsilon) for g in groups]

    _, quota, _ = config.recycle.resolved(n)
    if quota > 0:
        rb = recycle_groups(groups, config.recycle, n, derive_rng(config.seed, "recycle", step_index), step_index)
        queue.extend(recycled_to_tasks(rb))
    drained = queue.drain(quota)

    terms, solve_visited = [], []
    for g, a in zip(groups, advs):
        t, v = _group_terms(g, a, policy)
        terms.extend(t)
        solve_visited.extend(v)
    judge_visited, judge_rewards = [], []
    if drained:
        if config.recycle.mode == "grpo":
            jr = [derive_rng(config.seed, "judge", step_index, j, t.id) for j, t in enumerate(drained)]
            jgroups = sample_groups(policy, drained, n, jr)
            for g in jgroups:
                t, v = _group_terms(g, compute_advantages(g.rewards, config.epsilon), policy)
                terms.extend(t)
                judge_visited.extend(v)
                judge_rewards.extend(g.rewards)
        else:
            for jt in drained:
                p = jt.prompt()
                terms.append((p, policy.vocab(p).to_index(jt.gold_answer), 1.0))
                judge_visited.append(p)

    kl_values: list[float] = []
    acc = GradientAccumulator()
    kl_prompts = list(dict.fromkeys(solve_visited + judge_visited))
    _accumulate(policy, ref, terms, kl_prompts, config.kl_coef, acc, kl_values)
    if acc.grads:
        apply_gradient(policy, acc, config.step_size)

    counts = {"pointwise": 0, "pairwise": 0, "reflect": 0}
    for jt in drained:
        counts[jt.kind.value] += 1
    mean_reward = _mean(r for g in groups for r in g.rewards)
    kl = _mean(kl_values)
    return StepReport(
        step_index=step_index,
        mean_reward=mean_reward,
        mean_advantage_abs=_mean(abs(v) for a in advs for v in a.values),
        kl_value=kl,
        objective_estimate=mean_reward - config.kl_coef * kl,
        recycled_counts=counts,
        judge_reward=_mean(judge_rewards),
        queue_length=len(queue),
    )


class Trainer:
    """Holds the evolving state of a run: policy, reference, recycle queue, step."""

    def __init__(self, policy, config: TrainConfig, batch_size: int = 4):
        if batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        self.policy = policy
        self.config = config
        self.batch_size = batch_size
        self.ref = snapshot_reference(policy)
        self.queue = RecycleQueue()
        self.step_index = 0

    def next_batch(self, tasks) -> list:
        rng = derive_rng(self.config.seed, "batch", self.step_index)
        idx = rng.integers(0, len(tasks), size=self.batch_size)
        return [tasks[int(i)] for i in idx]

    def step(self, tasks) -> StepReport:
        k = self.config.ref_refresh
        if k and self.step_index > 0 and self.step_index % k == 0:
            self.ref = snapshot_reference(self.policy)
        report = train_step(self.policy, self.ref, self.next_batch(tasks), self.config, self.step_index, self.queue)
        self.step_index += 1
        return report

    def run(self, tasks, steps: int, on_report=None) -> list[StepReport]:
        if len(tasks) == 0:
            raise ParameterError("training task set is empty")
        reports = []
        for _ in range(steps):
            r = self.step(tasks)
            reports.append(r)
            if on_report is not None:
                on_report(r)
        return reports
