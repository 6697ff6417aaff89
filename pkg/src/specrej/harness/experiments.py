"""Train / generate / benchmark / correlate, returning JSON-ready reports.

Prompts are independent: each gets its own seed derived from the run seed and
its id, so results do not depend on how prompts are spread over workers.
"""

from __future__ import annotations

import csv
import io
import json
import os
import statistics
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..decoding import DecodeConfig, best_of_n, decode, speculative_rejection
from ..lm_core import (
    LanguageModel,
    ModelError,
    ScriptedModel,
    read_corpus,
    load_model,
    save_model,
    train_ngram,
)
from ..memory_model import BudgetError, MemoryBudget
from ..metrics import (
    ComputeTally,
    MetricError,
    correlation_report,
    improvement_score,
    oracle_token_savings,
    relative_attention,
    relative_compute,
    speedup,
)
from ..reward import LexicalReward, MeanLogProb, load_lexical_table, score_partial
from ..rng import derive_seed
from .config import ConfigError, public, resolve_path

SCHEMA_VERSION = 1


# ---------------------------------------------------------------- loading


def build_model(cfg: dict) -> LanguageModel:
    path = resolve_path(cfg, cfg["model"]["path"])
    if path is not None:
        return load_model(path)
    corpus = resolve_path(cfg, cfg["model"]["corpus"])
    return train_ngram(read_corpus(corpus), int(cfg["model"]["order"]), float(cfg["model"]["smoothing"]))


def build_reward(cfg: dict, model: LanguageModel):
    rc = cfg["reward"]
    if rc["kind"] == "mean_log_prob":
        return MeanLogProb()
    table = load_lexical_table(resolve_path(cfg, rc["table"]))
    if rc["gamma"] is not None:
        table.gamma = float(rc["gamma"])
    if rc["bias"] is not None:
        table.bias = float(rc["bias"])
    table.__post_init__()
    return LexicalReward(table, model.vocab)


def load_prompts(cfg: dict, model: LanguageModel) -> list[dict]:
    """``[{"id", "prompt"}]`` from the JSON Lines prompt file.

    With no prompt file and a scripted model, the fixture's own prompts are used.
    """
    path = resolve_path(cfg, cfg["prompts"])
    if path is None:
        if not isinstance(model, ScriptedModel):
            raise ConfigError("no prompt file given")
        prompts = [{"id": f"s{i:03d}", "prompt": model.vocab.decode(p)} for i, p in enumerate(model.scripts)]
    else:
        prompts = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    prompts.append({"id": str(obj["id"]), "prompt": str(obj["prompt"])})
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ConfigError(f"{path}:{lineno}: bad prompt record ({exc})") from None
    if cfg["max_prompts"] is not None:
        prompts = prompts[: int(cfg["max_prompts"])]
    return prompts


def budget_for(cfg: dict, prompt_len: int, fit_batch: int) -> MemoryBudget:
    bc = cfg["budget"]
    m = int(cfg["max_new_tokens"])
    headroom = int(bc["headroom"]) if bc["headroom"] is not None else m
    if bc["capacity"] is None:
        capacity = fit_batch * (prompt_len * int(bc["prompt_cost"]) + m * int(bc["gen_cost"]))
    else:
        capacity = int(bc["capacity"])
    return MemoryBudget(capacity, int(bc["prompt_cost"]), int(bc["gen_cost"]), headroom)


def _decode_config(cfg: dict, seed: int, budget: MemoryBudget, alpha=None, n=None) -> DecodeConfig:
    ib = cfg["budget"]["initial_batch"]
    return DecodeConfig(
        alpha=float(cfg["alpha"] if alpha is None else alpha),
        n=int(cfg["n"] if n is None else n),
        run_seed=seed,
        max_new_tokens=int(cfg["max_new_tokens"]),
        budget=budget,
        initial_batch=None if ib is None else int(ib),
    )


# ---------------------------------------------------------------- workers

_STATE: dict = {}


def _init_worker(cfg: dict) -> None:
    model = build_model(cfg)
    _STATE["cfg"] = cfg
    _STATE["model"] = model
    _STATE["reward"] = build_reward(cfg, model)


def _map_prompts(cfg: dict, fn, prompts: list[dict]) -> list:
    jobs = max(1, int(cfg.get("jobs") or 1))
    if jobs == 1 or len(prompts) < 2:
        if _STATE.get("cfg") is not cfg:
            _init_worker(cfg)
        return [fn(p) for p in prompts]
    chunk = max(1, len(prompts) // (4 * jobs))
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(cfg,)) as pool:
        return list(pool.map(fn, prompts, chunksize=chunk))


# ---------------------------------------------------------------- generate


def run_generate(cfg: dict, prompt_text: str | None = None, prompt_id: str | None = None) -> dict:
    model = build_model(cfg)
    reward = build_reward(cfg, model)
    if prompt_text is None:
        prompts = load_prompts(cfg, model)
        if prompt_id is not None:
            matches = [p for p in prompts if p["id"] == prompt_id]
            if not matches:
                raise ConfigError(f"unknown prompt id {prompt_id!r}")
            entry = matches[0]
        else:
            entry = prompts[0]
    else:
        entry = {"id": prompt_id or "cli", "prompt": prompt_text}
    ids = model.vocab.encode(entry["prompt"])
    seed = int(cfg["seed"])
    budget = budget_for(cfg, len(ids), int(cfg["n"]))
    outcome = decode(cfg["strategy"], model, reward, ids, _decode_config(cfg, seed, budget))
    record = {
        "prompt_id": entry["id"],
        "prompt": entry["prompt"],
        "seed": seed,
        **outcome.to_dict(model.vocab, include_tokens=True),
    }
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "generate",
        "config": public(cfg),
        "records": [record],
    }


# ---------------------------------------------------------------- benchmark


def _benchmark_prompt(entry: dict) -> dict:
    cfg, model, reward = _STATE["cfg"], _STATE["model"], _STATE["reward"]
    ids = model.vocab.encode(entry["prompt"])
    seed = derive_seed(int(cfg["seed"]), entry["id"])
    grid = sorted(int(n) for n in cfg["benchmark"]["n_grid"])
    n_min, n_max = grid[0], grid[-1]
    budget = budget_for(cfg, len(ids), n_min)

    runs = []
    for n in grid:
        runs.append(("bon", str(n), best_of_n(model, reward, ids, _decode_config(cfg, seed, budget, n=n))))
    base, top = runs[0][2], runs[-1][2]
    errors = []
    for alpha in cfg["benchmark"]["alphas"]:
        try:
            out = speculative_rejection(model, reward, ids, _decode_config(cfg, seed, budget, alpha=alpha))
        except BudgetError as exc:
            errors.append({"prompt_id": entry["id"], "strategy": "specrej",
                           "setting": str(float(alpha)), "error": str(exc)})
            continue
        runs.append(("specrej", str(float(alpha)), out))

    rows = []
    for strategy, setting, out in runs:
        rows.append({
            "prompt_id": entry["id"],
            "strategy": strategy,
            "setting": setting,
            "winner_index": out.winner.index,
            "winner_text": model.vocab.decode(out.winner.generated),
            "winner_reward": out.winner_reward,
            "initial_batch": out.initial_batch,
            "pool_size": out.candidate_pool_size,
            "compute": out.compute.to_dict(),
            "relative_compute": relative_compute(out.compute, base.compute),
            "relative_attention": relative_attention(out.compute, base.compute),
            "speedup": speedup(out.compute, top.compute),
            "improvement_score": improvement_score(out.winner_reward, base.pool_rewards),
            "capacity": out.capacity,
            "peak_footprint": out.peak_footprint,
            "rounds": [r.to_dict() for r in out.rounds],
        })
    return {
        "prompt_id": entry["id"],
        "prompt": entry["prompt"],
        "seed": seed,
        "baseline_rewards": base.pool_rewards,
        "baseline_compute": base.compute.to_dict(),
        "max_baseline_compute": top.compute.to_dict(),
        "rows": rows,
        "errors": errors,
    }


def aggregate_benchmark(records: list[dict]) -> list[dict]:
    """Average per-prompt metrics for every (strategy, setting), in first-seen order."""
    groups: dict[tuple, list[dict]] = {}
    for rec in records:
        for row in rec["rows"]:
            groups.setdefault((row["strategy"], row["setting"]), []).append(row)
    out = []
    for (strategy, setting), rows in groups.items():
        out.append({
            "strategy": strategy,
            "setting": setting,
            "n_prompts": len(rows),
            "relative_compute": statistics.fmean(r["relative_compute"] for r in rows),
            "relative_attention": statistics.fmean(r["relative_attention"] for r in rows),
            "speedup": statistics.fmean(r["speedup"] for r in rows),
            "improvement_score": statistics.fmean(r["improvement_score"] for r in rows),
            "winner_reward": statistics.fmean(r["winner_reward"] for r in rows),
            "max_peak_over_capacity": max(
                (r["peak_footprint"] - r["capacity"] for r in rows if r["capacity"] is not None),
                default=None,
            ),
        })
    return out


def run_benchmark(cfg: dict) -> dict:
    model = build_model(cfg)
    prompts = load_prompts(cfg, model)
    records = _map_prompts(cfg, _benchmark_prompt, prompts)
    errors = [e for r in records for e in r.pop("errors")]
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "benchmark",
        "config": public(cfg),
        "records": records,
        "errors": errors,
        "aggregates": aggregate_benchmark(records),
    }


def benchmark_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["relative_compute", "improvement_score", "speedup", "relative_attention"]
    w.writerow(["strategy", "setting", "prompt_id", *cols])
    for rec in report["records"]:
        for row in rec["rows"]:
            w.writerow([row["strategy"], row["setting"], rec["prompt_id"], *(repr(row[c]) for c in cols)])
    for agg in report["aggregates"]:
        w.writerow([agg["strategy"], agg["setting"], "mean", *(repr(agg[c]) for c in cols)])
    return buf.getvalue()


# ---------------------------------------------------------------- correlate


def correlate_tau(cfg: dict) -> int:
    tau = cfg["correlate"]["tau"]
    return int(cfg["max_new_tokens"]) // 2 if tau is None else int(tau)


def _correlate_prompt(entry: dict) -> dict:
    cfg, model, reward = _STATE["cfg"], _STATE["model"], _STATE["reward"]
    ids = model.vocab.encode(entry["prompt"])
    seed = derive_seed(int(cfg["seed"]), entry["id"])
    tau = correlate_tau(cfg)
    n = int(cfg["correlate"]["n_samples"])
    bon = best_of_n(model, reward, ids, _decode_config(cfg, seed, MemoryBudget(), n=n))
    seqs = bon.sequences
    partial = [score_partial(reward, s.prefix(tau)) for s in seqs]
    final = bon.pool_rewards
    lengths = [s.length for s in seqs]
    rec = {
        "prompt_id": entry["id"],
        "seed": seed,
        "partial": partial,
        "final": final,
        "lengths": lengths,
        "token_savings": oracle_token_savings(lengths, partial, final, tau),
    }
    try:
        rec["correlation"] = correlation_report(partial, final).to_dict()
    except MetricError as exc:
        rec["correlation"] = None
        rec["undefined_reason"] = str(exc)
    return rec


def _summary(values: list[float]) -> dict:
    if not values:
        return {"n": 0}
    qs = statistics.quantiles(values, n=4, method="inclusive") if len(values) > 1 else [values[0]] * 3
    return {
        "n": len(values),
        "mean": statistics.fmean(values),
        "median": statistics.median(values),
        "q1": qs[0],
        "q3": qs[2],
        "min": min(values),
        "max": max(values),
    }


def aggregate_correlation(records: list[dict]) -> dict:
    ok = [r for r in records if r["correlation"] is not None]
    return {
        "pearson": _summary([r["correlation"]["pearson"] for r in ok]),
        "kendall": _summary([r["correlation"]["kendall"] for r in ok]),
        "token_savings": _summary([r["token_savings"] for r in records]),
        "undefined_prompts": [r["prompt_id"] for r in records if r["correlation"] is None],
    }


def run_correlate(cfg: dict) -> dict:
    model = build_model(cfg)
    prompts = load_prompts(cfg, model)
    records = _map_prompts(cfg, _correlate_prompt, prompts)
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "correlate",
        "config": public(cfg),
        "tau": correlate_tau(cfg),
        "records": records,
        "aggregates": aggregate_correlation(records),
    }


def correlation_csvs(report: dict) -> tuple[str, str]:
    """(scatter points, per-prompt statistics) as CSV text."""
    scatter = io.StringIO()
    w = csv.writer(scatter, lineterminator="\n")
    w.writerow(["prompt_id", "index", "partial", "final", "length"])
    for rec in report["records"]:
        for i, (p, f, n) in enumerate(zip(rec["partial"], rec["final"], rec["lengths"])):
            w.writerow([rec["prompt_id"], i, repr(p), repr(f), n])
    per = io.StringIO()
    w = csv.writer(per, lineterminator="\n")
    w.writerow(["prompt_id", "pearson", "kendall", "ols_slope", "ols_intercept", "n_points", "token_savings"])
    for rec in report["records"]:
        c = rec["correlation"]
        vals = ["", "", "", "", len(rec["partial"])] if c is None else [
            repr(c["pearson"]), repr(c["kendall"]), repr(c["ols_slope"]), repr(c["ols_intercept"]), c["n_points"]]
        w.writerow([rec["prompt_id"], *vals, repr(rec["token_savings"])])
    return scatter.getvalue(), per.getvalue()


# ---------------------------------------------------------------- train / output


def run_train(corpus_path, order: int, smoothing: float, model_out) -> LanguageModel:
    corpus_path = Path(corpus_path)
    try:
        docs = read_corpus(corpus_path)
    except UnicodeDecodeError as exc:
        raise ModelError(f"{corpus_path}: not UTF-8 text ({exc})") from None
    model = train_ngram(docs, order, smoothing)
    Path(model_out).parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(Path(model_out), None, writer=lambda p: save_model(model, p))
    return model


def dump_json(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=True, allow_nan=False) + "\n"


def _atomic_write(path: Path, text: str | None, writer=None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    try:
        if writer is None:
            Path(tmp).write_text(text, encoding="utf-8")
        else:
            writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_outputs(out_dir, files: dict[str, str]) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    for name, text in files.items():
        _atomic_write(out_dir / name, text)
        written.append(out_dir / name)
    return written
