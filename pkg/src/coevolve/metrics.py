"""Self-judgment precision / recall / F1 and JSONL metric sinks.

The positive class is "the model's own answer is actually correct": recall
is the share of correct answers the model accepts, precision the share of
accepted answers that are correct.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .policy import CORRECT, Candidate, Mode, Prompt, log_softmax
from .tts import judge_candidate, solve_once, task_stream
from .verifier import verify_answer


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


@dataclass(frozen=True)
class JudgeStats:
    true_pos: int
    false_pos: int
    false_neg: int
    true_neg: int

    @property
    def total(self) -> int:
        return self.true_pos + self.false_pos + self.false_neg + self.true_neg

    @property
    def precision(self) -> float:
        return _ratio(self.true_pos, self.true_pos + self.false_pos)

    @property
    def recall(self) -> float:
        return _ratio(self.true_pos, self.true_pos + self.false_neg)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    @property
    def solve_accuracy(self) -> float:
        return _ratio(self.true_pos + self.false_neg, self.total)

    @classmethod
    def from_pairs(cls, actual, predicted) -> "JudgeStats":
        tp = fp = fn = tn = 0
        for a, p in zip(actual, predicted):
            if a and p:
                tp += 1
            elif p:
                fp += 1
            elif a:
                fn += 1
            else:
                tn += 1
        return cls(tp, fp, fn, tn)

    def to_dict(self) -> dict:
        return {
            "true_pos": self.true_pos, "false_pos": self.false_pos,
            "false_neg": self.false_neg, "true_neg": self.true_neg,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "solve_accuracy": self.solve_accuracy,
        }


def judge_stats(policy, tasks, seed: int = 0) -> JudgeStats:
    """Solve each task once, then let the model judge its own ``(cot, answer)``."""
    if len(tasks) == 0:
        raise ParameterError("judge_stats needs a non-empty task set")
    actual, predicted = [], []
    for t in tasks:
        rng = task_stream(seed, t)
        cot, answer = solve_once(policy, t, rng)
        verdict = judge_candidate(policy, t, Candidate(cot=cot, answer=answer), rng)
        actual.append(verify_answer(answer, t))
        predicted.append(int(verdict == CORRECT))
    return JudgeStats.from_pairs(actual, predicted)


def expected_accuracy(policy, tasks) -> float:
    """Exact probability that one sampled (CoT, answer) is correct, averaged over tasks."""
    total = 0.0
    for t in tasks:
        first = Prompt(t, Mode.SOLVE_COT)
        p_cot = np.exp(log_softmax(policy.logits_many([first])[0]))
        cot_vocab = policy.vocab(first)
        prompts = [Prompt(t, Mode.SOLVE_ANSWER, (Candidate(cot=cot_vocab.to_value(i)),)) for i in range(len(p_cot))]
        gold = policy.vocab_for(t.family, Mode.SOLVE_ANSWER).to_index(t.gold_answer)
        p_gold = np.array([np.exp(log_softmax(z))[gold] for z in policy.logits_many(prompts)])
        total += float(p_cot @ p_gold)
    return total / len(tasks)


def write_metrics(records, sink_path) -> None:
    """Append records as JSON lines and fsync. Raises ``OSError`` if unwritable."""
    with open(sink_path, "a") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def read_metrics(path) -> list[dict]:
    """Read a metrics file; a truncated final line (crash mid-write) is skipped."""
    lines = Path(path).read_text().split("\n")
    out = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError:
            if i == len(lines) - 1:
                break
            raise
    return out
