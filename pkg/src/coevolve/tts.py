"""Test-time scaling: generate, self-judge, then accept or reflect.

Round 0 samples a CoT and an answer; every round is judged in JudgePoint
mode on its own candidate. A rejected candidate is passed to Reflect mode,
which proposes a revised answer for the next round. The loop stops at the
first self-accepted answer or when the round budget runs out, in which case
the last candidate is returned. Ground truth is read only to fill
``final_correct`` after the loop has finished.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .policy import CORRECT, Candidate, Mode, Prompt, draw_index, log_softmax
from .rng import derive_rng
from .verifier import verify_answer

DEFAULT_MAX_ROUNDS = 4


@dataclass(frozen=True)
class TtsRound:
    index: int
    cot: int | None
    answer: int
    verdict: int

    @property
    def accepted(self) -> bool:
        return self.verdict == CORRECT

    def to_dict(self) -> dict:
        return {"round": self.index, "cot": self.cot, "answer": self.answer,
                "verdict": self.verdict, "accepted": self.accepted}


@dataclass(frozen=True)
class TtsTrace:
    task_id: str
    rounds: tuple[TtsRound, ...]
    final_answer: int
    terminated_by: str
    final_correct: int | None

    def to_dict(self, with_outcome: bool = True) -> dict:
        d = {
            "task_id": self.task_id,
            "rounds": [r.to_dict() for r in self.rounds],
            "final_answer": self.final_answer,
            "terminated_by": self.terminated_by,
        }
        if with_outcome:
            d["final_correct"] = self.final_correct
        return d


def draw(policy, prompt: Prompt, rng: np.random.Generator) -> int:
    """Sample one action value for ``prompt`` (one uniform consumed)."""
    lp = log_softmax(policy.logits_many([prompt])[0])
    return policy.vocab(prompt).to_value(draw_index(np.exp(lp), rng.random()))


def solve_once(policy, task, rng: np.random.Generator) -> tuple[int, int]:
    cot = draw(policy, Prompt(task, Mode.SOLVE_COT), rng)
    answer = draw(policy, Prompt(task, Mode.SOLVE_ANSWER, (Candidate(cot=cot),)), rng)
    return cot, answer


def judge_candidate(policy, task, candidate: Candidate, rng: np.random.Generator) -> int:
    return draw(policy, Prompt(task, Mode.JUDGE_POINT, (candidate,)), rng)


def tts_solve(policy, task, max_rounds: int, rng: np.random.Generator) -> TtsTrace:
    if not isinstance(max_rounds, int) or max_rounds < 1:
        raise ParameterError(f"max_rounds must be >= 1, got {max_rounds!r}")
    policy.check_prompt(Prompt(task, Mode.SOLVE_COT))
    rounds = []
    cot, answer = solve_once(policy, task, rng)
    for t in range(max_rounds):
        verdict = judge_candidate(policy, task, Candidate(cot=cot, answer=answer), rng)
        rounds.append(TtsRound(t, cot, answer, verdict))
        if verdict == CORRECT or t == max_rounds - 1:
            break
        answer = draw(policy, Prompt(task, Mode.REFLECT, (Candidate(cot=cot, answer=answer),)), rng)
        cot = None
    last = rounds[-1]
    final_correct = None if task.gold_answer is None else verify_answer(last.answer, task)
    return TtsTrace(task.id, tuple(rounds), last.answer,
                    "self_accept" if last.accepted else "budget", final_correct)


def task_stream(seed: int, task) -> np.random.Generator:
    """Per-task evaluation stream shared by single-pass eval, TTS and judge stats."""
    return derive_rng(seed, "eval", task.id)


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class TtsSummary:
    accuracy: float
    mean_rounds: float
    traces: list

    def to_dict(self) -> dict:
        return {"tts_accuracy": self.accuracy, "mean_rounds": self.mean_rounds, "tasks": len(self.traces)}


def tts_eval(policy, tasks, max_rounds: int = DEFAULT_MAX_ROUNDS, seed: int = 0, workers: int = 1) -> TtsSummary:
    if len(tasks) == 0:
        raise ParameterError("tts_eval needs a non-empty task set")
    traces = _map(lambda t: tts_solve(policy, t, max_rounds, task_stream(seed, t)), list(tasks), workers)
    return TtsSummary(
        float(np.mean([tr.final_correct for tr in traces])),
        float(np.mean([len(tr.rounds) for tr in traces])),
        traces,
    )


def single_pass_accuracy(policy, tasks, seed: int = 0, workers: int = 1) -> float:
    """Sampled one-shot accuracy, paired with :func:`tts_eval` through the shared streams."""
    if len(tasks) == 0:
        raise ParameterError("evaluation needs a non-empty task set")
    results = _map(lambda t: verify_answer(solve_once(policy, t, task_stream(seed, t))[1], t), list(tasks), workers)
    return float(np.mean(results))


def dump_traces(traces, fh) -> None:
    for tr in traces:
        fh.write(json.dumps(tr.to_dict(), sort_keys=True) + "\n")
