import io
import json

import numpy as np
import pytest

from coevolve.errors import ParameterError
from coevolve.oracles import ModeOverride, constant_judge, oracle_judge, oracle_judge_and_reflect
from coevolve.policy import CORRECT, INCORRECT, Mode, tabular_policy_new
from coevolve.tts import dump_traces, single_pass_accuracy, task_stream, tts_eval, tts_solve
from coevolve.tasks import ModArithParams, gen_tasks


def always_gold(policy, judge=CORRECT):
    def gold(field):
        return lambda p: policy.vocab(p).to_index(getattr(p.task, field))

    return ModeOverride(policy, {Mode.SOLVE_COT: gold("gold_cot"), Mode.SOLVE_ANSWER: gold("gold_answer"),
                                 Mode.JUDGE_POINT: lambda _p: judge})


@pytest.fixture
def noisy(m10):
    return tabular_policy_new([m10], init="noise", scale=1.0, seed=4)


def test_trace_invariants(noisy, mod_tasks):
    for max_rounds in (1, 2, 5):
        for tr in tts_eval(noisy, mod_tasks, max_rounds, seed=1).traces:
            assert 1 <= len(tr.rounds) <= max_rounds
            accepted = [r.accepted for r in tr.rounds]
            assert sum(accepted) <= 1 and (not any(accepted) or accepted[-1])
            assert tr.final_answer == tr.rounds[-1].answer
            assert tr.terminated_by == ("self_accept" if accepted[-1] else "budget")
            assert tr.rounds[0].cot is not None and all(r.cot is None for r in tr.rounds[1:])
            if tr.terminated_by == "budget":
                assert len(tr.rounds) == max_rounds


def test_self_accepting_judge_is_single_pass(noisy, mod_tasks):
    pol = constant_judge(noisy, CORRECT)
    s = tts_eval(pol, mod_tasks, 4, seed=3)
    assert s.mean_rounds == 1.0
    assert s.accuracy == single_pass_accuracy(pol, mod_tasks, seed=3)


def test_always_reject_uses_the_whole_budget(noisy, mod_tasks):
    s = tts_eval(constant_judge(noisy, INCORRECT), mod_tasks, 3, seed=3)
    assert s.mean_rounds == 3.0 and 0.0 <= s.accuracy <= 1.0
    assert all(tr.terminated_by == "budget" for tr in s.traces)


def test_always_gold_policy(noisy, mod_tasks):
    s = tts_eval(always_gold(noisy), mod_tasks, 4)
    assert s.accuracy == 1.0 and s.mean_rounds == 1.0


def test_oracle_judge_and_reflect_finishes_within_two_rounds(noisy, mod_tasks):
    s = tts_eval(oracle_judge_and_reflect(noisy), mod_tasks, 4, seed=2)
    assert s.accuracy == 1.0
    assert all(len(tr.rounds) <= 2 for tr in s.traces)


def test_max_rounds_one_matches_single_pass(noisy, mod_tasks):
    for seed in range(3):
        assert tts_eval(noisy, mod_tasks, 1, seed).accuracy == single_pass_accuracy(noisy, mod_tasks, seed)


def test_oracle_judge_never_loses(noisy):
    tasks = gen_tasks("mod_arith", 200, 8, ModArithParams(10))
    pol = oracle_judge(noisy)
    for seed in range(3):
        tts = tts_eval(pol, tasks, 4, seed)
        single = single_pass_accuracy(pol, tasks, seed)
        assert tts.accuracy >= single
        # paired streams: a task solved in round 0 is accepted there
        for tr in tts.traces:
            if tr.rounds[0].accepted:
                assert tr.final_correct == 1


def test_no_gold_leakage(noisy, mod_tasks):
    for t in mod_tasks:
        a = tts_solve(noisy, t, 4, task_stream(5, t))
        b = tts_solve(noisy, t.blinded(), 4, task_stream(5, t))
        assert a.to_dict(with_outcome=False) == b.to_dict(with_outcome=False)
        assert b.final_correct is None


def test_workers_do_not_change_results(noisy, mod_tasks):
    a = tts_eval(noisy, mod_tasks, 4, seed=6, workers=1)
    b = tts_eval(noisy, mod_tasks, 4, seed=6, workers=3)
    assert [t.to_dict() for t in a.traces] == [t.to_dict() for t in b.traces]
    assert single_pass_accuracy(noisy, mod_tasks, 6, 1) == single_pass_accuracy(noisy, mod_tasks, 6, 3)


def test_bad_arguments(noisy, mod_tasks):
    with pytest.raises(ParameterError):
        tts_solve(noisy, mod_tasks[0], 0, np.random.default_rng(0))
    with pytest.raises(ParameterError):
        tts_eval(noisy, [], 4)
    with pytest.raises(ParameterError):
        single_pass_accuracy(noisy, [])


def test_dump_traces(noisy, mod_tasks):
    fh = io.StringIO()
    traces = tts_eval(noisy, mod_tasks, 2).traces
    dump_traces(traces, fh)
    rows = [json.loads(line) for line in fh.getvalue().splitlines()]
    assert [r["task_id"] for r in rows] == [t.id for t in mod_tasks]
    assert set(rows[0]) == {"task_id", "rounds", "final_answer", "terminated_by", "final_correct"}
