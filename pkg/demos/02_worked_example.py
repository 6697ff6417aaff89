"""
Halting a bad response early
============================

Two scripted responses to the same prompt. After two tokens the lexical
reward already separates them (2.92 vs -1.88), and with ``alpha = 0.5``
the lower one is halted. The survivor finishes with reward 8.19.
"""

from pathlib import Path

import specrej
from specrej import DecodeConfig, LexicalReward, MemoryBudget, load_model
from specrej.reward import load_lexical_table
from specrej.decoding import speculative_rejection

data = Path(specrej.__file__).parent / "data"
model = load_model(data / "worked_example.json")
reward = LexicalReward(load_lexical_table(data / "worked_example_reward.tsv"), model.vocab)
prompt = list(next(iter(model.scripts)))

# room for exactly two sequences holding two generated tokens each
budget = MemoryBudget(capacity=2 * (len(prompt) + 2), headroom=2)
out = speculative_rejection(model, reward, prompt, DecodeConfig(alpha=0.5, run_seed=2, budget=budget))

for r in out.rounds:
    print(f"round {r.round_index}: tau={r.decision_token} partial={r.partial_rewards} "
          f"r_cut={r.r_cut} halted={r.rejected}")
print("winner:", model.vocab.decode(out.winner.generated))
print("final reward:", out.winner_reward)
