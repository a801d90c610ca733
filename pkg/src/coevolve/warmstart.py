"""Supervised warm start of the solve modes.

RL fine-tuning normally starts from a base model that can already solve a
fair share of its tasks. A policy initialised at random on ModArith solves
at chance, so group rewards are almost always all-zero and the RL signal
never gets going. A few likelihood steps on gold ``(cot, answer)`` pairs
stand in for that base model. Only SolveCot and SolveAnswer are trained;
judge and reflect heads keep their initial weights.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .policy import Candidate, GradientAccumulator, Mode, Prompt, apply_gradient, log_softmax
from .rng import derive_rng


def solve_targets(task) -> list[tuple[Prompt, int]]:
    """The two supervised targets of a task: gold CoT, and gold answer given gold CoT."""
    return [
        (Prompt(task, Mode.SOLVE_COT), task.gold_cot),
        (Prompt(task, Mode.SOLVE_ANSWER, (Candidate(cot=task.gold_cot),)), task.gold_answer),
    ]


def likelihood_step(policy, targets, step_size: float) -> float:
    """One ascent step on the summed log-likelihood; returns the mean log-likelihood before it."""
    prompts = [p for p, _ in targets]
    dlogits, total = [], 0.0
    for (p, value), z in zip(targets, policy.logits_many(prompts)):
        lp = log_softmax(z)
        a = policy.vocab(p).to_index(value)
        total += float(lp[a])
        g = -np.exp(lp)
        g[a] += 1.0
        dlogits.append(g)
    acc = GradientAccumulator()
    policy.backprop_many(prompts, dlogits, acc)
    acc.sample_count = len(targets)
    apply_gradient(policy, acc, step_size)
    return total / len(targets)


def warm_start(policy, tasks, steps: int, batch_size: int = 32, step_size: float = 0.01,
               seed: int = 0) -> list[float]:
    """Run ``steps`` likelihood steps on batches drawn with replacement from ``tasks``."""
    if steps < 0:
        raise ParameterError("warm start steps must be >= 0")
    if steps and len(tasks) == 0:
        raise ParameterError("warm start needs a non-empty task set")
    if batch_size < 1:
        raise ParameterError("warm start batch size must be >= 1")
    history = []
    for i in range(steps):
        idx = derive_rng(seed, "warm", i).integers(0, len(tasks), size=batch_size)
        targets = [pair for k in idx for pair in solve_targets(tasks[int(k)])]
        history.append(likelihood_step(policy, targets, step_size))
    return history
