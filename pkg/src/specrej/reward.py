"""Scoring rules for partial and completed responses.

A reward scores the generated part of a :class:`~specrej.lm_core.Sequence`.
Scoring a completed sequence as a "partial" gives the same number as scoring
it as final, which is what lets rejection rounds treat finished and
unfinished responses uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lm_core import COMPLETED, Sequence, Vocabulary


class RewardError(ValueError):
    pass


class MeanLogProb:
    """Average per-token log-probability of the generated tokens (``<eos>`` included)."""

    name = "mean_log_prob"

    def score(self, seq: Sequence) -> float:
        return seq.cum_log_prob / seq.length

    def to_dict(self) -> dict:
        return {"kind": self.name}


@dataclass
class LexicalRewardTable:
    weights: dict[str, float]
    gamma: float = 0.98
    bias: float = 0.0

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise RewardError("gamma must lie in (0, 1]")
        for tok, w in self.weights.items():
            if not math.isfinite(w):
                raise RewardError(f"non-finite weight for {tok!r}")


def load_lexical_table(path: str | Path) -> LexicalRewardTable:
    """Read ``token<TAB>weight`` lines.

    Header lines ``@gamma<TAB>value`` and ``@bias<TAB>value`` set the
    discount and bias; ``#`` starts a comment.
    """
    weights: dict[str, float] = {}
    header = {"gamma": 0.98, "bias": 0.0}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise RewardError(f"{path}:{lineno}: expected 'token<TAB>weight'")
            key, value = parts
            try:
                num = float(value)
            except ValueError:
                raise RewardError(f"{path}:{lineno}: bad number {value!r}") from None
            if key.startswith("@"):
                if key[1:] not in header:
                    raise RewardError(f"{path}:{lineno}: unknown header {key!r}")
                header[key[1:]] = num
            else:
                weights[key] = num
    return LexicalRewardTable(weights, gamma=header["gamma"], bias=header["bias"])


def save_lexical_table(table: LexicalRewardTable, path: str | Path) -> None:
    lines = [f"@gamma\t{table.gamma!r}", f"@bias\t{table.bias!r}"]
    lines += [f"{tok}\t{w!r}" for tok, w in table.weights.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class LexicalReward:
    """``bias + sum_i gamma**i * weight(token_i)`` over generated tokens, i from 0.

    Tokens missing from the table weigh zero.
    """

    table: LexicalRewardTable
    vocab: Vocabulary
    name: str = field(default="lexical", init=False)

    def __post_init__(self):
        self._weights = np.zeros(len(self.vocab))
        for tok, w in self.table.weights.items():
            if tok in self.vocab:
                self._weights[self.vocab.index[tok]] = w
        self._discounts = np.ones(0)

    def _discount(self, n: int) -> np.ndarray:
        if len(self._discounts) < n:
            self._discounts = self.table.gamma ** np.arange(max(n, 2 * len(self._discounts)))
        return self._discounts[:n]

    def score(self, seq: Sequence) -> float:
        # fsum: exact, order-independent summation of the discounted terms
        terms = self._discount(seq.length) * self._weights[seq.generated]
        return math.fsum([self.table.bias, *terms.tolist()])

    def to_dict(self) -> dict:
        return {"kind": self.name, "gamma": self.table.gamma, "bias": self.table.bias}


RewardSpec = MeanLogProb | LexicalReward


def score_partial(spec: RewardSpec, seq: Sequence) -> float:
    if seq.length == 0:
        raise RewardError("cannot score empty generation")
    return spec.score(seq)


def score_final(spec: RewardSpec, seq: Sequence) -> float:
    if seq.status != COMPLETED:
        raise RewardError("sequence not complete")
    return spec.score(seq)
