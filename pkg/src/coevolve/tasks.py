"""Verifiable task families, seeded generators and JSONL task files.

Two families are provided. Both have a single integer answer and a single
integer intermediate ("CoT") value, so every policy over them is a small
categorical distribution that can be enumerated exactly.

* ``mod_arith``: ``(a op b) mod M``. The CoT value is the unreduced
  ``a op b``; the answer is that value reduced mod ``M``.
* ``max_of_list``: the maximum of ``L`` integers. The CoT value is the index
  of the maximum (first occurrence); the answer is the value at that index.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import ClassVar, Iterator, Union

import numpy as np

from .errors import ParameterError, ParseError, ValidationError

MAX_MODULUS = 1000
MAX_MUL_MODULUS = 100
MAX_LIST_LENGTH = 16
MAX_VALUE_SPAN = 1000


class Family(str, Enum):
    MOD_ARITH = "mod_arith"
    MAX_OF_LIST = "max_of_list"


@dataclass(frozen=True)
class ModArithQuestion:
    a: int
    b: int
    op: str
    modulus: int

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "op": self.op, "modulus": self.modulus}


@dataclass(frozen=True)
class MaxOfListQuestion:
    values: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"values": list(self.values)}


Question = Union[ModArithQuestion, MaxOfListQuestion]


@dataclass(frozen=True)
class ValueRange:
    """Contiguous integer range ``[offset, offset + size)`` mapped onto action indices."""

    offset: int
    size: int

    def to_value(self, index: int) -> int:
        return self.offset + int(index)

    def to_index(self, value: int) -> int | None:
        i = int(value) - self.offset
        return i if 0 <= i < self.size else None

    def __contains__(self, value: int) -> bool:
        return self.to_index(value) is not None


@dataclass(frozen=True)
class ModArithParams:
    modulus: int = 10
    op: str = "add"

    family: ClassVar[Family] = Family.MOD_ARITH

    def __post_init__(self):
        if not isinstance(self.modulus, int) or not 2 <= self.modulus <= MAX_MODULUS:
            raise ParameterError(f"modulus must be in [2, {MAX_MODULUS}], got {self.modulus!r}")
        if self.op not in ("add", "mul"):
            raise ParameterError(f"op must be 'add' or 'mul', got {self.op!r}")
        if self.op == "mul" and self.modulus > MAX_MUL_MODULUS:
            raise ParameterError(f"op='mul' supports modulus <= {MAX_MUL_MODULUS}")

    @property
    def answer_range(self) -> ValueRange:
        return ValueRange(0, self.modulus)

    @property
    def cot_range(self) -> ValueRange:
        top = self.modulus - 1
        return ValueRange(0, (2 * top if self.op == "add" else top * top) + 1)

    def draw(self, rng: np.random.Generator) -> ModArithQuestion:
        a, b = rng.integers(0, self.modulus, size=2)
        return ModArithQuestion(int(a), int(b), self.op, self.modulus)

    def accepts(self, question: Question) -> bool:
        return (
            isinstance(question, ModArithQuestion)
            and question.modulus == self.modulus
            and question.op == self.op
        )

    def to_dict(self) -> dict:
        return {"family": self.family.value, "modulus": self.modulus, "op": self.op}


@dataclass(frozen=True)
class MaxOfListParams:
    length: int = 5
    low: int = 0
    high: int = 9

    family: ClassVar[Family] = Family.MAX_OF_LIST

    def __post_init__(self):
        if not isinstance(self.length, int) or not 2 <= self.length <= MAX_LIST_LENGTH:
            raise ParameterError(f"list length must be in [2, {MAX_LIST_LENGTH}], got {self.length!r}")
        if self.high <= self.low:
            raise ParameterError(f"value range is empty: low={self.low}, high={self.high}")
        if self.high - self.low + 1 > MAX_VALUE_SPAN:
            raise ParameterError(f"value range wider than {MAX_VALUE_SPAN}")

    @property
    def answer_range(self) -> ValueRange:
        return ValueRange(self.low, self.high - self.low + 1)

    @property
    def cot_range(self) -> ValueRange:
        return ValueRange(0, self.length)

    def draw(self, rng: np.random.Generator) -> MaxOfListQuestion:
        values = rng.integers(self.low, self.high + 1, size=self.length)
        return MaxOfListQuestion(tuple(int(v) for v in values))

    def accepts(self, question: Question) -> bool:
        return (
            isinstance(question, MaxOfListQuestion)
            and len(question.values) == self.length
            and all(self.low <= v <= self.high for v in question.values)
        )

    def to_dict(self) -> dict:
        return {"family": self.family.value, "length": self.length, "low": self.low, "high": self.high}


FamilyParams = Union[ModArithParams, MaxOfListParams]


def params_from_dict(d: dict) -> FamilyParams:
    d = dict(d)
    family = Family(d.pop("family"))
    cls = ModArithParams if family is Family.MOD_ARITH else MaxOfListParams
    return cls(**d)


def solve(question: Question) -> tuple[int, int]:
    """Apply the family rule; returns ``(answer, cot)``."""
    if isinstance(question, ModArithQuestion):
        cot = question.a + question.b if question.op == "add" else question.a * question.b
        return cot % question.modulus, cot
    values = question.values
    idx = max(range(len(values)), key=lambda i: (values[i], -i))
    return values[idx], idx


@dataclass(frozen=True)
class Task:
    """One verifiable problem.

    ``gold_answer`` and ``gold_cot`` are ``None`` only on gold-blinded copies
    made with :meth:`blinded`, which exist to prove inference never reads them.
    """

    id: str
    family: Family
    question: Question
    gold_answer: int | None
    gold_cot: int | None

    def blinded(self) -> "Task":
        return dataclasses.replace(self, gold_answer=None, gold_cot=None)

    def validate(self) -> None:
        q = self.question
        if self.family is Family.MOD_ARITH:
            if not isinstance(q, ModArithQuestion):
                raise ValidationError(f"task {self.id}: mod_arith task needs a, b, op, modulus")
            if not 2 <= q.modulus <= MAX_MODULUS or q.op not in ("add", "mul"):
                raise ValidationError(f"task {self.id}: bad modulus/op ({q.modulus}, {q.op!r})")
            if not (0 <= q.a < q.modulus and 0 <= q.b < q.modulus):
                raise ValidationError(f"task {self.id}: operands must lie in [0, {q.modulus})")
            if self.gold_answer is not None and not 0 <= self.gold_answer < q.modulus:
                raise ValidationError(
                    f"task {self.id}: gold_answer {self.gold_answer} outside [0, {q.modulus})"
                )
        else:
            if not isinstance(q, MaxOfListQuestion):
                raise ValidationError(f"task {self.id}: max_of_list task needs values")
            if not 2 <= len(q.values) <= MAX_LIST_LENGTH:
                raise ValidationError(f"task {self.id}: list length {len(q.values)} outside [2, 16]")
            if self.gold_answer is not None and self.gold_answer not in q.values:
                raise ValidationError(f"task {self.id}: gold_answer {self.gold_answer} not in list")
        answer, cot = solve(q)
        if self.gold_answer is not None and self.gold_answer != answer:
            raise ValidationError(f"task {self.id}: gold_answer {self.gold_answer} != {answer}")
        if self.gold_cot is not None and self.gold_cot != cot:
            raise ValidationError(f"task {self.id}: gold_cot {self.gold_cot} != {cot}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "family": self.family.value,
            "question": self.question.to_dict(),
            "gold_answer": self.gold_answer,
            "gold_cot": self.gold_cot,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Task":
        family = Family(d["family"])
        q = d["question"]
        if family is Family.MOD_ARITH:
            question = ModArithQuestion(int(q["a"]), int(q["b"]), str(q["op"]), int(q["modulus"]))
        else:
            question = MaxOfListQuestion(tuple(int(v) for v in q["values"]))
        return cls(str(d["id"]), family, question, int(d["gold_answer"]), int(d["gold_cot"]))


@dataclass(frozen=True)
class TaskSet:
    tasks: tuple[Task, ...]
    seed: int = 0

    def __post_init__(self):
        seen = set()
        for t in self.tasks:
            if t.id in seen:
                raise ValidationError(f"duplicate task id {t.id}")
            seen.add(t.id)

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self) -> Iterator[Task]:
        return iter(self.tasks)

    def __getitem__(self, i: int) -> Task:
        return self.tasks[i]


def default_params(family: Family | str) -> FamilyParams:
    return ModArithParams() if Family(family) is Family.MOD_ARITH else MaxOfListParams()


def gen_tasks(family: Family | str, count: int, seed: int, params: FamilyParams | None = None) -> TaskSet:
    """Draw ``count`` tasks from a family with a seeded PCG64 stream."""
    family = Family(family)
    if not isinstance(count, int) or count < 1:
        raise ParameterError(f"count must be a positive integer, got {count!r}")
    params = default_params(family) if params is None else params
    if params.family is not family:
        raise ParameterError(f"params for {params.family.value} given to {family.value} generator")
    rng = np.random.default_rng(seed)
    tasks = []
    for i in range(count):
        q = params.draw(rng)
        answer, cot = solve(q)
        tasks.append(Task(f"{family.value}-s{seed}-{i:06d}", family, q, answer, cot))
    return TaskSet(tuple(tasks), seed)


def dump_tasks(taskset: TaskSet) -> str:
    return "".join(json.dumps(t.to_dict(), sort_keys=True) + "\n" for t in taskset)


def save_tasks(taskset: TaskSet, path: str | Path) -> None:
    Path(path).write_text(dump_tasks(taskset))


def load_tasks(path: str | Path) -> TaskSet:
    tasks = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                task = Task.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: malformed task line ({exc})") from exc
            task.validate()
            tasks.append(task)
    return TaskSet(tuple(tasks), 0)
