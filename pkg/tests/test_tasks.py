import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coevolve.errors import ParameterError, ParseError, ValidationError
from coevolve.tasks import (
    MaxOfListParams,
    ModArithParams,
    dump_tasks,
    gen_tasks,
    load_tasks,
    save_tasks,
    solve,
)


def test_mod_arith_seed7_first_task():
    t = gen_tasks("mod_arith", 1, 7, ModArithParams(10))[0]
    # operands come from the seeded generator; answer/cot follow the family rule
    assert (t.question.a, t.question.b) == (9, 6)
    assert t.gold_cot == 15 and t.gold_answer == 5


def test_max_of_list_first_task():
    t = gen_tasks("max_of_list", 1, 1, MaxOfListParams(3))[0]
    assert t.question.values == (4, 5, 7)
    assert t.gold_answer == 7 and t.gold_cot == 2


def test_argmax_takes_first_occurrence():
    from coevolve.tasks import MaxOfListQuestion
    assert solve(MaxOfListQuestion((3, 8, 1, 8))) == (8, 1)


def test_generation_is_byte_identical():
    p = ModArithParams(13, "mul")
    assert dump_tasks(gen_tasks("mod_arith", 50, 9, p)) == dump_tasks(gen_tasks("mod_arith", 50, 9, p))
    assert dump_tasks(gen_tasks("mod_arith", 50, 9, p)) != dump_tasks(gen_tasks("mod_arith", 50, 10, p))


@pytest.mark.parametrize("kwargs", [dict(modulus=1), dict(modulus=1001), dict(modulus=101, op="mul"),
                                    dict(op="sub")])
def test_bad_mod_params(kwargs):
    with pytest.raises(ParameterError):
        ModArithParams(**kwargs)


@pytest.mark.parametrize("kwargs", [dict(length=1), dict(length=17), dict(low=5, high=4)])
def test_bad_list_params(kwargs):
    with pytest.raises(ParameterError):
        MaxOfListParams(**kwargs)


def test_count_must_be_positive():
    with pytest.raises(ParameterError):
        gen_tasks("mod_arith", 0, 1)


def test_ranges():
    p = ModArithParams(7)
    assert p.answer_range.size == 7 and p.cot_range.size == 13
    assert ModArithParams(7, "mul").cot_range.size == 37
    q = MaxOfListParams(4, -3, 3)
    assert q.answer_range.to_value(0) == -3 and q.cot_range.size == 4


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 60), st.sampled_from(["add", "mul"]), st.integers(0, 2**31))
def test_generated_tasks_validate_and_stay_in_range(m, op, seed):
    p = ModArithParams(m, op)
    for t in gen_tasks("mod_arith", 5, seed, p):
        t.validate()
        assert t.gold_answer in p.answer_range and t.gold_cot in p.cot_range


def test_roundtrip(tmp_path, mod_tasks, max_tasks):
    for ts in (mod_tasks, max_tasks):
        path = tmp_path / "t.jsonl"
        save_tasks(ts, path)
        assert load_tasks(path).tasks == ts.tasks


def test_load_rejects_bad_line_with_location(tmp_path, mod_tasks):
    path = tmp_path / "t.jsonl"
    path.write_text(dump_tasks(mod_tasks) + "{not json\n")
    with pytest.raises(ParseError, match=r"t\.jsonl:21"):
        load_tasks(path)


def test_load_rejects_inconsistent_gold(tmp_path, mod_tasks):
    d = mod_tasks[0].to_dict()
    d["gold_answer"] = (d["gold_answer"] + 1) % 10
    path = tmp_path / "t.jsonl"
    path.write_text(json.dumps(d) + "\n")
    with pytest.raises(ValidationError, match=d["id"]):
        load_tasks(path)


def test_duplicate_ids_rejected(mod_tasks):
    from coevolve.tasks import TaskSet
    with pytest.raises(ValidationError):
        TaskSet((mod_tasks[0], mod_tasks[0]), 0)


def test_empty_file_gives_empty_set(tmp_path):
    path = tmp_path / "e.jsonl"
    path.write_text("\n\n")
    assert len(load_tasks(path)) == 0
