import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from coevolve.errors import ParameterError
from coevolve.metrics import JudgeStats, expected_accuracy, judge_stats, read_metrics, write_metrics
from coevolve.oracles import ModeOverride
from coevolve.policy import CORRECT, INCORRECT, Mode, tabular_policy_new
from coevolve.tasks import gen_tasks
from coevolve.tts import single_pass_accuracy


def scripted(policy, tasks, verdict):
    """Answers gold on even-indexed tasks (wrong otherwise) with a constant verdict."""
    good = {t.id for t in list(tasks)[::2]}

    def answer(p):
        v = policy.vocab(p)
        a = p.task.gold_answer if p.task.id in good else (p.task.gold_answer + 1) % v.size
        return v.to_index(a)

    return ModeOverride(policy, {
        Mode.SOLVE_COT: lambda p: policy.vocab(p).to_index(p.task.gold_cot),
        Mode.SOLVE_ANSWER: answer,
        Mode.JUDGE_POINT: lambda _p: verdict,
    })


def all_gold(policy, verdict):
    return ModeOverride(policy, {
        Mode.SOLVE_COT: lambda p: policy.vocab(p).to_index(p.task.gold_cot),
        Mode.SOLVE_ANSWER: lambda p: policy.vocab(p).to_index(p.task.gold_answer),
        Mode.JUDGE_POINT: lambda _p: verdict,
    })


def test_all_correct_always_accept(mod_tasks, m10):
    s = judge_stats(all_gold(tabular_policy_new([m10]), CORRECT), mod_tasks)
    assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)
    assert (s.true_pos, s.false_pos, s.false_neg, s.true_neg) == (20, 0, 0, 0)


def test_half_correct_always_accept(mod_tasks, m10):
    s = judge_stats(scripted(tabular_policy_new([m10]), mod_tasks, CORRECT), mod_tasks)
    assert s.precision == 0.5 and s.recall == 1.0
    assert s.f1 == pytest.approx(2 / 3, abs=1e-15)
    assert s.solve_accuracy == 0.5


def test_always_reject(mod_tasks, m10):
    for pol in (all_gold(tabular_policy_new([m10]), INCORRECT),
                scripted(tabular_policy_new([m10]), mod_tasks, INCORRECT)):
        s = judge_stats(pol, mod_tasks)
        assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)


def test_zero_denominators():
    assert JudgeStats(0, 0, 0, 0).to_dict()["f1"] == 0.0
    s = JudgeStats(0, 0, 0, 5)
    assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_identities(tp, fp, fn, tn):
    actual = [1] * tp + [0] * fp + [1] * fn + [0] * tn
    predicted = [1] * tp + [1] * fp + [0] * fn + [0] * tn
    s = JudgeStats.from_pairs(actual, predicted)
    assert (s.true_pos, s.false_pos, s.false_neg, s.true_neg) == (tp, fp, fn, tn)
    assert s.total == len(actual)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    assert s.precision == p and s.recall == r
    assert s.f1 == (2 * p * r / (p + r) if p + r else 0.0)
    if tp + fp + fn:
        assert s.f1 == pytest.approx(2 * tp / (2 * tp + fp + fn), rel=1e-12)
    assert 0.0 <= s.f1 <= 1.0


def test_judge_stats_is_deterministic_and_paired(mod_tasks, m10):
    pol = tabular_policy_new([m10], init="noise", scale=1.0, seed=2)
    a, b = judge_stats(pol, mod_tasks, 4), judge_stats(pol, mod_tasks, 4)
    assert a == b
    assert a.solve_accuracy == single_pass_accuracy(pol, mod_tasks, 4)
    with pytest.raises(ParameterError):
        judge_stats(pol, [])


def test_expected_accuracy(m10):
    tasks = gen_tasks("mod_arith", 10, 1, m10)
    assert expected_accuracy(tabular_policy_new([m10]), tasks) == pytest.approx(0.1, abs=1e-12)
    assert expected_accuracy(all_gold(tabular_policy_new([m10]), CORRECT), tasks) == pytest.approx(1.0)


def test_write_read_roundtrip(tmp_path):
    path = tmp_path / "m.jsonl"
    recs = [{"event": "step", "step": 0, "x": 0.5}, {"event": "eval", "acc": 1.0}]
    write_metrics(recs, path)
    assert read_metrics(path) == recs
    write_metrics(recs[:1], path)
    assert read_metrics(path) == recs + recs[:1]


def test_truncated_last_line_is_tolerated(tmp_path):
    path = tmp_path / "m.jsonl"
    write_metrics([{"a": 1}], path)
    with open(path, "a") as fh:
        fh.write('{"a": ')
    assert read_metrics(path) == [{"a": 1}]
    path.write_text('{"a": \n{"b": 2}\n')
    with pytest.raises(json.JSONDecodeError):
        read_metrics(path)


def test_bad_path(tmp_path):
    with pytest.raises(OSError):
        write_metrics([{"a": 1}], tmp_path / "missing" / "m.jsonl")
