"""Best-of-N and Speculative Rejection decoding.

Both strategies draw sequence ``k`` from counter stream ``(run_seed, k)``, so a
Speculative Rejection run starting from ``b`` sequences sees exactly the
tokens Best-of-``b`` would have produced, up to the point where it halts them.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .lm_core import COMPLETED, LanguageModel, Sequence, extend, new_sequences
from .memory_model import BudgetError, MemoryBudget, initial_batch_size, would_oom
from .metrics import ComputeTally
from .reward import RewardSpec, score_final, score_partial


class DecodeError(ValueError):
    pass


@dataclass
class DecodeConfig:
    alpha: float = 0.5
    n: int = 8
    run_seed: int = 0
    max_new_tokens: int = 256
    budget: MemoryBudget = field(default_factory=MemoryBudget)
    # overrides the budget-derived initial batch for Speculative Rejection
    initial_batch: int | None = None

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise DecodeError("alpha must lie in [0, 1)")
        if self.n < 1:
            raise DecodeError("n must be >= 1")
        if self.max_new_tokens < 1:
            raise DecodeError("max_new_tokens must be >= 1")
        if self.initial_batch is not None and self.initial_batch < 1:
            raise DecodeError("initial_batch must be >= 1")


@dataclass
class RejectionRoundRecord:
    round_index: int
    decision_token: int
    alive: list[int]
    partial_rewards: list[float]
    r_cut: float
    accepted: list[int]
    completed_this_round: list[int]
    rejected: list[int]
    batch_before: int
    batch_after: int
    # memory held while each token of this round was generated
    footprints: list[int] = field(default_factory=list)
    # steps taken although the budget was already exhausted (no rejection possible)
    forced_steps: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DecodeOutcome:
    strategy: str
    winner: Sequence
    winner_reward: float
    pool: list[int]
    pool_rewards: list[float]
    rounds: list[RejectionRoundRecord]
    compute: ComputeTally
    sequences: list[Sequence]
    initial_batch: int
    capacity: int | None = None

    @property
    def candidate_pool_size(self) -> int:
        return len(self.pool)

    @property
    def peak_footprint(self) -> int:
        return max((f for r in self.rounds for f in r.footprints), default=0)

    def to_dict(self, vocab=None, include_tokens: bool = False) -> dict:
        out = {
            "strategy": self.strategy,
            "winner_index": self.winner.index,
            "winner_reward": self.winner_reward,
            "winner_tokens": list(self.winner.generated),
            "initial_batch": self.initial_batch,
            "candidate_pool": self.pool,
            "candidate_rewards": self.pool_rewards,
            "compute": self.compute.to_dict(),
            "capacity": self.capacity,
            "peak_footprint": self.peak_footprint,
            "rounds": [r.to_dict() for r in self.rounds],
        }
        if vocab is not None:
            out["winner_text"] = vocab.decode(self.winner.generated)
        if include_tokens:
            out["sequences"] = [
                {"index": s.index, "status": s.status, "tokens": list(s.generated),
                 "cum_log_prob": s.cum_log_prob}
                for s in self.sequences
            ]
        return out


def _step(model: LanguageModel, running: list[Sequence], seed: int, tally: ComputeTally) -> None:
    for s in running:
        tally.generated_tokens += 1
        tally.attention_units += len(s.prompt) + s.length + 1
    extend(model, running, seed)


def _argmax_lowest(indices: list[int], rewards: list[float]) -> int:
    best = None
    for i, r in sorted(zip(indices, rewards)):
        if best is None or r > best[1]:
            best = (i, r)
    return best[0]


def best_of_n(model: LanguageModel, reward: RewardSpec, prompt, config: DecodeConfig) -> DecodeOutcome:
    """Sample ``config.n`` full responses and keep the highest final reward."""
    seqs = new_sequences(model, prompt, range(config.n), config.max_new_tokens)
    tally = ComputeTally()
    running = list(seqs)
    while running:
        _step(model, running, config.run_seed, tally)
        running = [s for s in running if s.is_active]
    rewards = []
    for s in seqs:
        rewards.append(score_final(reward, s))
        tally.count_reward(s.length)
    pool = [s.index for s in seqs]
    k = _argmax_lowest(pool, rewards)
    return DecodeOutcome("bon", seqs[k], rewards[k], pool, rewards, [], tally, seqs, config.n)


def compute_cutoff(partial_rewards, alpha: float) -> float:
    """Lower ``alpha``-quantile: the k-th smallest value, ``k = min(b, floor(alpha*b) + 1)``."""
    if len(partial_rewards) == 0:
        raise DecodeError("no partial rewards")
    if not 0 <= alpha < 1:
        raise DecodeError("alpha must lie in [0, 1)")
    b = len(partial_rewards)
    # decimal form of alpha, so 0.3 * 10 is exactly 3 rather than 2.99...
    k = min(b, math.floor(Fraction(repr(float(alpha))) * b) + 1)
    return sorted(partial_rewards)[k - 1]


def accepted_indices(partial_rewards, r_cut: float) -> list[int]:
    """Positions whose partial reward is at least ``r_cut``."""
    return [k for k, r in enumerate(partial_rewards) if r >= r_cut]


def speculative_rejection(model: LanguageModel, reward: RewardSpec, prompt,
                          config: DecodeConfig) -> DecodeOutcome:
    """Start from a memory-sized batch and halt low-scoring prefixes at each OOM point.

    Each round extends all live sequences in lockstep until one more token
    would overflow the budget (or nothing is left running), scores every
    prefix, and keeps those at or above the ``alpha`` lower quantile.
    Finished sequences always join the candidate pool.
    """
    budget = config.budget
    p = len(prompt)
    if config.initial_batch is None:
        b_init = initial_batch_size(budget, p)
    else:
        b_init = config.initial_batch
        if would_oom(budget, b_init, p, 0):
            raise BudgetError("budget too small for prompt")
    seqs = new_sequences(model, prompt, range(b_init), config.max_new_tokens)
    tally = ComputeTally()
    rounds: list[RejectionRoundRecord] = []
    pool: list[int] = []
    alive = list(seqs)
    g = 0  # all live sequences share this generated length
    while alive:
        running = [s for s in alive if s.is_active]
        footprints: list[int] = []
        forced = 0
        while running:
            if would_oom(budget, len(running), p, g):
                if footprints or forced:
                    break
                # rejection freed too little memory to move at all; take one step anyway
                forced += 1
            _step(model, running, config.run_seed, tally)
            g += 1
            footprints.append(budget.footprint(len(running), p, g))
            running = [s for s in running if s.is_active]

        scores = []
        for s in alive:
            scores.append(score_partial(reward, s))
            tally.count_reward(s.length)
        r_cut = compute_cutoff(scores, config.alpha)
        keep = accepted_indices(scores, r_cut)
        keep_set = set(keep)
        completed = [s.index for s in alive if s.status == COMPLETED]
        pool.extend(completed)
        rejected = []
        for pos, s in enumerate(alive):
            if pos not in keep_set and s.is_active:
                s.reject()
                rejected.append(s.index)
        survivors = [alive[pos] for pos in keep if alive[pos].is_active]
        rounds.append(RejectionRoundRecord(
            round_index=len(rounds),
            decision_token=g,
            alive=[s.index for s in alive],
            partial_rewards=scores,
            r_cut=r_cut,
            accepted=[alive[pos].index for pos in keep],
            completed_this_round=completed,
            rejected=rejected,
            batch_before=len(alive),
            batch_after=len(survivors),
            footprints=footprints,
            forced_steps=forced,
        ))
        alive = survivors

    pool.sort()
    pool_rewards = []
    for i in pool:
        pool_rewards.append(score_final(reward, seqs[i]))
        tally.count_reward(seqs[i].length)
    k = _argmax_lowest(pool, pool_rewards)
    return DecodeOutcome("specrej", seqs[k], pool_rewards[pool.index(k)], pool, pool_rewards,
                         rounds, tally, seqs, b_init, budget.capacity)


def decode(strategy: str, model: LanguageModel, reward: RewardSpec, prompt,
           config: DecodeConfig) -> DecodeOutcome:
    if strategy == "bon":
        return best_of_n(model, reward, prompt, config)
    if strategy == "specrej":
        return speculative_rejection(model, reward, prompt, config)
    raise DecodeError(f"invalid strategy {strategy!r}; expected 'bon' or 'specrej'")
