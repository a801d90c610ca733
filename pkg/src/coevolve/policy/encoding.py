"""Fixed feature encoding of prompts for the MLP policy.

Layout: ``[family one-hot | mode one-hot | block per family]``. A family
block holds the operands followed by two candidate slots; each integer is
written both as a thermometer (``v > k`` for every k) and as a one-hot, so
sums and comparisons are near-linear in the input while exact lookups stay
available. Only the block of the prompt's own family is non-zero.
"""

from __future__ import annotations

import numpy as np

from ..tasks import Family, ModArithParams
from .base import ALL_MODES, Candidate, Prompt

_CACHE_LIMIT = 1 << 17


def _int_width(size: int) -> int:
    return (size - 1) + size


def _write_int(out: np.ndarray, pos: int, value: int, size: int) -> None:
    out[pos:pos + value] = 1.0
    out[pos + size - 1 + value] = 1.0


class PromptEncoder:
    def __init__(self, families):
        self.families = list(families)
        self.family_index = {p.family: i for i, p in enumerate(self.families)}
        self.mode_index = {m: i for i, m in enumerate(ALL_MODES)}
        pos = len(self.families) + len(ALL_MODES)
        self.block_start = {}
        for p in self.families:
            self.block_start[p.family] = pos
            pos += self._block_width(p)
        self.dim = pos
        self._cache: dict[str, np.ndarray] = {}

    def _slot_width(self, p) -> int:
        return 2 + _int_width(p.cot_range.size) + _int_width(p.answer_range.size)

    def _operand_width(self, p) -> int:
        if isinstance(p, ModArithParams):
            return 2 * _int_width(p.modulus) + 2
        return p.length * _int_width(p.answer_range.size)

    def _block_width(self, p) -> int:
        return self._operand_width(p) + 2 * self._slot_width(p)

    def encode(self, prompt: Prompt) -> np.ndarray:
        key = prompt.context_key()
        x = self._cache.get(key)
        if x is None:
            x = self._encode(prompt)
            x.setflags(write=False)
            if len(self._cache) >= _CACHE_LIMIT:
                self._cache.clear()
            self._cache[key] = x
        return x

    def encode_many(self, prompts) -> np.ndarray:
        return np.stack([self.encode(p) for p in prompts]) if prompts else np.zeros((0, self.dim))

    def _encode(self, prompt: Prompt) -> np.ndarray:
        x = np.zeros(self.dim)
        fam = prompt.task.family
        p = self.families[self.family_index[fam]]
        x[self.family_index[fam]] = 1.0
        x[len(self.families) + self.mode_index[prompt.mode]] = 1.0
        pos = self.block_start[fam]
        q = prompt.task.question
        if fam is Family.MOD_ARITH:
            m = p.modulus
            _write_int(x, pos, q.a, m)
            pos += _int_width(m)
            _write_int(x, pos, q.b, m)
            pos += _int_width(m)
            x[pos + (0 if q.op == "add" else 1)] = 1.0
            pos += 2
        else:
            r = p.answer_range
            for v in q.values:
                _write_int(x, pos, r.to_index(v), r.size)
                pos += _int_width(r.size)
        for slot in range(2):
            cand = prompt.candidates[slot] if slot < len(prompt.candidates) else None
            self._write_candidate(x, pos, cand, p)
            pos += self._slot_width(p)
        return x

    def _write_candidate(self, x, pos, cand: Candidate | None, p) -> None:
        cot_size, ans = p.cot_range.size, p.answer_range
        if cand is not None and cand.cot is not None:
            x[pos] = 1.0
            _write_int(x, pos + 1, cand.cot, cot_size)
        pos += 1 + _int_width(cot_size)
        if cand is not None and cand.answer is not None:
            x[pos] = 1.0
            _write_int(x, pos + 1, ans.to_index(cand.answer), ans.size)

