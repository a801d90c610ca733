"""Rule-based binary rewards and ``\\box{}`` answer extraction."""

from __future__ import annotations

import re

from .errors import ExtractionError

_BOX = re.compile(r"\\box\{([^{}]*)\}")
_INT = re.compile(r"[+-]?\d+")


def verify_answer(predicted, task) -> int:
    """1 iff ``predicted`` equals the task's gold answer. Total: never raises."""
    gold = task.gold_answer
    if gold is None or predicted is None:
        return 0
    return int(type(predicted) is not bool and predicted == gold)


def verify_cot(predicted_cot, task) -> int:
    gold = getattr(task, "gold_cot", None)
    if gold is None or predicted_cot is None:
        return 0
    return int(type(predicted_cot) is not bool and predicted_cot == gold)


def render_boxed(value: int) -> str:
    return "\\box{%d}" % value


def extract_boxed(text: str) -> int:
    """Integer inside the last ``\\box{...}`` in ``text``.

    Raises :class:`ExtractionError` when there is no box or its content is not
    an integer; callers score that as reward 0 (see :func:`reward_from_text`).
    """
    matches = _BOX.findall(text)
    if not matches:
        raise ExtractionError("no \\box{} in text")
    content = matches[-1].strip()
    if not _INT.fullmatch(content):
        raise ExtractionError(f"boxed content {content!r} is not an integer")
    return int(content)


def reward_from_text(text: str, task) -> int:
    try:
        return verify_answer(extract_boxed(text), task)
    except ExtractionError:
        return 0
