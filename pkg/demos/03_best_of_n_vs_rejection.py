"""
Best-of-N against Speculative Rejection
=======================================

For a handful of prompts, compare Best-of-8, Best-of-64 and Speculative
Rejection starting from 64 sequences in a memory budget that only fits
eight full-length responses. Compute is counted in generated tokens
relative to Best-of-8.
"""

import statistics

from specrej.harness.config import load_config
from specrej.harness.experiments import run_benchmark

cfg = load_config(None, {
    "max_prompts": 10,
    "max_new_tokens": 128,
    "budget.initial_batch": 64,
    "benchmark.n_grid": [8, 16, 32, 64],
    "benchmark.alphas": [0.2, 0.5, 0.8],
})
report = run_benchmark(cfg)

print(f"{'strategy':10s}{'setting':>8s}{'compute':>10s}{'score':>9s}")
for a in report["aggregates"]:
    print(f"{a['strategy']:10s}{a['setting']:>8s}{a['relative_compute']:10.2f}{a['improvement_score']:9.1f}")

# how quickly the batch shrinks on the first prompt
row = next(r for r in report["records"][0]["rows"] if r["strategy"] == "specrej" and r["setting"] == "0.5")
print("batch per round:", [r["batch_before"] for r in row["rounds"]])
print("decision tokens:", [r["decision_token"] for r in row["rounds"]])
print("peak memory / capacity:", row["peak_footprint"], "/", row["capacity"])
print("median rounds:", statistics.median(
    len(r["rounds"]) for rec in report["records"] for r in rec["rows"] if r["strategy"] == "specrej"))
