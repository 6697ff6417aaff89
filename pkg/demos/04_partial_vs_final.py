"""
Do early scores predict final scores?
=====================================

Samples 200 responses for a few prompts, scores each after 32 tokens and
at the end with the discounted lexical reward, and reports per-prompt
Pearson and Kendall correlation, plus the share of tokens an ideal early
stop could have skipped.
"""

from specrej.harness.config import load_config
from specrej.harness.experiments import run_correlate

cfg = load_config(None, {
    "max_prompts": 8,
    "max_new_tokens": 64,
    "reward.kind": "lexical",
    "reward.gamma": 0.98,
    "correlate.n_samples": 200,
})
report = run_correlate(cfg)
print("tau =", report["tau"])
for rec in report["records"]:
    c = rec["correlation"]
    print(f"{rec['prompt_id']}  pearson={c['pearson']:.3f}  kendall={c['kendall']:.3f}  "
          f"slope={c['ols_slope']:.2f}  saved={rec['token_savings']:.1%}")

agg = report["aggregates"]
print(f"median pearson {agg['pearson']['median']:.3f}, median savings {agg['token_savings']['median']:.1%}")
