"""Compute accounting, evaluation scores and partial/final correlation statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


class MetricError(ValueError):
    pass


@dataclass
class ComputeTally:
    """Deterministic stand-in for GPU time.

    ``attention_units`` adds, for every generated token, the full context
    length it attends over (prompt plus generated so far, itself included).
    """

    generated_tokens: int = 0
    attention_units: int = 0
    reward_calls: int = 0
    reward_tokens_scored: int = 0

    def __add__(self, other: "ComputeTally") -> "ComputeTally":
        return ComputeTally(
            self.generated_tokens + other.generated_tokens,
            self.attention_units + other.attention_units,
            self.reward_calls + other.reward_calls,
            self.reward_tokens_scored + other.reward_tokens_scored,
        )

    def count_reward(self, n_tokens: int) -> None:
        self.reward_calls += 1
        self.reward_tokens_scored += n_tokens

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ComputeTally":
        return cls(**d)


def relative_compute(tally: ComputeTally, baseline: ComputeTally) -> float:
    if baseline.generated_tokens <= 0:
        raise MetricError("baseline generated no tokens")
    return tally.generated_tokens / baseline.generated_tokens


def relative_attention(tally: ComputeTally, baseline: ComputeTally) -> float:
    if baseline.attention_units <= 0:
        raise MetricError("baseline has no attention units")
    return tally.attention_units / baseline.attention_units


def speedup(tally: ComputeTally, max_baseline: ComputeTally) -> float:
    if tally.generated_tokens <= 0:
        raise MetricError("tally generated no tokens")
    return max_baseline.generated_tokens / tally.generated_tokens


def improvement_score(sr_reward: float, bon_min_rewards) -> float:
    """Position of ``sr_reward`` in the baseline's reward range, scaled so the baseline max is 100."""
    rewards = [float(r) for r in bon_min_rewards]
    if not rewards:
        raise MetricError("no baseline rewards")
    hi, lo = max(rewards), min(rewards)
    if hi == lo:
        return 100.0 if sr_reward >= hi else 0.0
    return 100.0 * (1.0 - (hi - sr_reward) / (hi - lo))


def _pair(xs, ys, min_len: int = 2) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise MetricError("inputs must be 1-d and of equal length")
    if len(x) < min_len:
        raise MetricError(f"need at least {min_len} points")
    return x, y


def pearson(xs, ys) -> float:
    x, y = _pair(xs, ys)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise MetricError("degenerate correlation input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def kendall_tau(xs, ys) -> float:
    """Pairwise sign agreement; tied pairs contribute zero."""
    x, y = _pair(xs, ys)
    n = len(x)
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    concord = float(np.triu(sx * sy, k=1).sum())
    return 2.0 * concord / (n * (n - 1))


def ols_fit(xs, ys) -> tuple[float, float]:
    """Least-squares line ``y = slope * x + intercept``."""
    x, y = _pair(xs, ys)
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise MetricError("degenerate regression input")
    slope = float(dx @ (y - y.mean())) / sxx
    return slope, float(y.mean() - slope * x.mean())


@dataclass
class CorrelationReport:
    pearson: float
    kendall: float
    ols_slope: float
    ols_intercept: float
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def correlation_report(xs, ys) -> CorrelationReport:
    slope, intercept = ols_fit(xs, ys)
    return CorrelationReport(pearson(xs, ys), kendall_tau(xs, ys), slope, intercept, len(xs))


def oracle_token_savings(lengths, partial_scores, final_scores, tau: int) -> float:
    """Share of all generated tokens an ideal early stop at ``tau`` would skip.

    The ideal stop halts every response whose partial score is strictly below
    the partial score of the best final response; the tokens it skips are
    those generated after ``tau``.
    """
    lengths = [int(n) for n in lengths]
    if not (len(lengths) == len(partial_scores) == len(final_scores)):
        raise MetricError("lengths and score lists must be aligned")
    total = sum(lengths)
    if total == 0:
        return 0.0
    best = int(np.argmax(final_scores))
    threshold = partial_scores[best]
    saved = sum(max(0, n - tau) for n, p in zip(lengths, partial_scores) if p < threshold)
    return saved / total
