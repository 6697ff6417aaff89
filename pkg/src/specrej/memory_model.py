"""Simulated accelerator memory: a linear KV-cache cost model.

A live sequence holds ``prompt_len * prompt_cost + generated * gen_cost``
units. Completed and rejected sequences hold nothing.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class MemoryBudget:
    capacity: int = 120 * (64 + 256)
    prompt_cost: int = 1
    gen_cost: int = 1
    headroom: int = 256

    def __post_init__(self):
        if self.capacity <= 0:
            raise BudgetError("capacity must be positive")
        if self.prompt_cost < 1 or self.gen_cost < 1:
            raise BudgetError("per-token costs must be >= 1")
        if self.headroom < 1:
            raise BudgetError("headroom must be >= 1")

    def sequence_cost(self, prompt_len: int, gen_len: int) -> int:
        return prompt_len * self.prompt_cost + gen_len * self.gen_cost

    def footprint(self, active_count: int, prompt_len: int, gen_len: int) -> int:
        return active_count * self.sequence_cost(prompt_len, gen_len)

    @classmethod
    def fitting(cls, batch: int, prompt_len: int, gen_len: int,
                prompt_cost: int = 1, gen_cost: int = 1) -> "MemoryBudget":
        """Smallest budget holding ``batch`` sequences of ``gen_len`` generated tokens.

        ``headroom`` is set to ``gen_len`` so that ``initial_batch_size``
        returns exactly ``batch``.
        """
        capacity = batch * (prompt_len * prompt_cost + gen_len * gen_cost)
        return cls(capacity, prompt_cost, gen_cost, gen_len)

    def to_dict(self) -> dict:
        return asdict(self)


def initial_batch_size(budget: MemoryBudget, prompt_len: int) -> int:
    if prompt_len < 1:
        raise BudgetError("prompt_len must be >= 1")
    b = budget.capacity // budget.sequence_cost(prompt_len, budget.headroom)
    if b < 1:
        raise BudgetError("budget too small for prompt")
    return b


def would_oom(budget: MemoryBudget, active_count: int, prompt_len: int,
              current_gen_len: int) -> bool:
    """True if one more token for every active sequence would exceed capacity."""
    return budget.footprint(active_count, prompt_len, current_gen_len + 1) > budget.capacity
