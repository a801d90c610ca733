import numpy as np
import pytest

from coevolve.policy import Candidate, Mode, Prompt, mlp_policy_new, tabular_policy_new
from coevolve.recycle import JudgmentTask, Kind, Source
from coevolve.tasks import MaxOfListParams, ModArithParams, gen_tasks

# PASS/FAIL lines recorded by the acceptance tests, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def m10():
    return ModArithParams(10)


@pytest.fixture
def mod_tasks(m10):
    return gen_tasks("mod_arith", 20, 3, m10)


@pytest.fixture
def max_tasks():
    return gen_tasks("max_of_list", 20, 4, MaxOfListParams(4, 0, 5))


def all_families():
    return [ModArithParams(6), MaxOfListParams(3, 0, 4)]


def random_prompt(task, rng, params):
    """A prompt of a random mode with random (in-range) embedded candidates."""
    mode = list(Mode)[rng.integers(len(Mode))]
    cot = lambda: params.cot_range.to_value(int(rng.integers(params.cot_range.size)))
    ans = lambda: params.answer_range.to_value(int(rng.integers(params.answer_range.size)))

    def cand():
        kind = rng.integers(3)
        if kind == 0:
            return Candidate(cot=cot())
        if kind == 1:
            return Candidate(answer=ans())
        return Candidate(cot=cot(), answer=ans())

    if mode is Mode.SOLVE_COT:
        return Prompt(task, mode)
    if mode is Mode.SOLVE_ANSWER:
        return Prompt(task, mode, (Candidate(cot=cot()),))
    if mode is Mode.JUDGE_PAIR:
        return Prompt(task, mode, (cand(), cand()))
    return Prompt(task, mode, (cand(),))


def reflect_task(base, gold, cand=None):
    """Single-context judgment task: Reflect on ``base`` with answer vocabulary."""
    cand = cand or Candidate(cot=base.gold_cot, answer=(base.gold_answer + 1) % 2)
    return JudgmentTask(f"{base.id}#toy", base, Mode.REFLECT, (cand,), gold, Kind.REFLECT, Source.ANSWER)


@pytest.fixture
def noisy_tabular():
    return tabular_policy_new(all_families(), init="noise", scale=0.7, seed=11)


@pytest.fixture
def small_mlp():
    return mlp_policy_new(all_families(), 7, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_group(task, params, n, rng):
    """A scored group with uniformly random (in-range) CoT and answer actions."""
    from coevolve.rollout import RolloutGroup, RolloutSample
    from coevolve.verifier import verify_answer, verify_cot

    samples, rewards, cot_rewards = [], [], []
    for _ in range(n):
        c = params.cot_range.to_value(int(rng.integers(params.cot_range.size)))
        a = params.answer_range.to_value(int(rng.integers(params.answer_range.size)))
        if rng.random() < 0.3:
            c, a = task.gold_cot, task.gold_answer
        samples.append(RolloutSample(c, a, 0.0, 0.0))
        rewards.append(verify_answer(a, task))
        cot_rewards.append(verify_cot(c, task))
    return RolloutGroup(task, samples, rewards, cot_rewards)


def group_with_rewards(task, rewards, cot_rewards=None):
    """A group whose answers are gold exactly where ``rewards`` is 1."""
    from coevolve.rollout import RolloutGroup, RolloutSample

    cot_rewards = list(rewards) if cot_rewards is None else list(cot_rewards)
    samples = [
        RolloutSample(task.gold_cot if c else task.gold_cot + 1 + i, task.gold_answer if r else (task.gold_answer + 1 + i) % 1000,
                      0.0, 0.0)
        for i, (r, c) in enumerate(zip(rewards, cot_rewards))
    ]
    return RolloutGroup(task, samples, list(rewards), cot_rewards)
