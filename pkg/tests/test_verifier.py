import pytest
from hypothesis import given
from hypothesis import strategies as st

from coevolve.errors import ExtractionError
from coevolve.verifier import extract_boxed, render_boxed, reward_from_text, verify_answer, verify_cot


def test_verify(mod_tasks):
    t = mod_tasks[0]
    assert verify_answer(t.gold_answer, t) == 1
    assert verify_answer(t.gold_answer + 1, t) == 0
    assert verify_cot(t.gold_cot, t) == 1
    assert verify_cot(t.gold_answer - 1, t) == 0


def test_verify_is_total(mod_tasks):
    t = mod_tasks[0]
    for junk in (None, "7", 3.5, True, [1]):
        assert verify_answer(junk, t) in (0, 1)
    assert verify_answer(None, t) == 0
    assert verify_answer(True, t.blinded()) == 0


def test_bool_is_not_an_integer_answer(mod_tasks):
    t = next(t for t in mod_tasks if t.gold_answer == 1)
    assert verify_answer(True, t) == 0


def test_cot_example():
    from coevolve.tasks import ModArithQuestion, Task, Family
    t = Task("x", Family.MOD_ARITH, ModArithQuestion(3, 4, "add", 10), 7, 7)
    assert verify_cot(7, t) == 1 and verify_cot(17, t) == 0


@given(st.integers(-10**6, 10**6))
def test_box_roundtrip(v):
    assert extract_boxed(render_boxed(v)) == v
    assert extract_boxed(f"reasoning \\box{{0}} then \\box{{ {v} }}") == v


@pytest.mark.parametrize("text", ["no box here", "\\box{}", "\\box{3.5}", "\\box{seven}"])
def test_extraction_failures(text):
    with pytest.raises(ExtractionError):
        extract_boxed(text)


def test_reward_from_text(mod_tasks):
    t = mod_tasks[0]
    assert reward_from_text(f"so the answer is {render_boxed(t.gold_answer)}", t) == 1
    assert reward_from_text("no answer", t) == 0
