"""Experiment configuration: a nested YAML mapping with dotted-key overrides.

Paths starting with ``@data/`` point into the data shipped with the package;
other relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any

import yaml

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
DATA_PREFIX = "@data/"

DEFAULTS: dict[str, Any] = {
    "model": {
        "path": None,  # trained n-gram dump or scripted fixture; wins over corpus
        "corpus": "@data/reference_corpus.txt",
        "order": 3,
        "smoothing": 0.01,
    },
    "reward": {
        "kind": "mean_log_prob",  # or "lexical"
        "table": "@data/lexical_reward.tsv",
        "gamma": None,
        "bias": None,
    },
    "prompts": "@data/prompts.jsonl",
    "max_prompts": None,
    "seed": 0,
    "max_new_tokens": 128,
    "strategy": "specrej",
    "alpha": 0.5,
    "n": 8,
    "budget": {
        "capacity": None,  # None: exactly fits Best-of-n_min at full length
        "prompt_cost": 1,
        "gen_cost": 1,
        "headroom": None,  # None: max_new_tokens
        "initial_batch": 64,
    },
    "benchmark": {
        "n_grid": [8, 16, 32, 64, 128, 256],
        "alphas": [0.2, 0.4, 0.5, 0.6, 0.8],
    },
    "correlate": {
        "n_samples": 200,
        "tau": None,  # None: max_new_tokens // 2
    },
    "jobs": 1,
    "out": "runs",
}


class ConfigError(ValueError):
    pass


def deep_merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def set_dotted(cfg: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = cfg
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise ConfigError(f"unknown config key {dotted!r}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[parts[-1]] = value


def get_dotted(cfg: dict, dotted: str) -> Any:
    node = cfg
    for part in dotted.split("."):
        node = node[part]
    return node


def parse_value(text: str) -> Any:
    """Interpret an override string with YAML scalar/list rules (``8``, ``0.5``, ``[8, 16]``, ``null``).

    Anything YAML rejects (such as ``@data/x.json``) is kept as a plain string,
    unless it looks like a list or mapping.
    """
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        if text.lstrip()[:1] in ("[", "{"):
            raise ConfigError(f"cannot parse override value {text!r}") from None
        return text


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        unknown = _unknown_keys(DEFAULTS, data)
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {', '.join(unknown)}")
        cfg = deep_merge(cfg, data)
        base_dir = path.resolve().parent
    for key, value in (overrides or {}).items():
        set_dotted(cfg, key, value)
    cfg["_base_dir"] = str(base_dir)
    validate(cfg)
    return cfg


def _unknown_keys(ref: dict, data: dict, prefix: str = "") -> list[str]:
    bad = []
    for key, value in data.items():
        if key not in ref:
            bad.append(prefix + key)
        elif isinstance(ref[key], dict) and isinstance(value, dict):
            bad += _unknown_keys(ref[key], value, prefix + key + ".")
    return bad


def validate(cfg: dict) -> None:
    if cfg["strategy"] not in ("bon", "specrej"):
        raise ConfigError(f"invalid strategy {cfg['strategy']!r}; expected 'bon' or 'specrej'")
    if cfg["reward"]["kind"] not in ("mean_log_prob", "lexical"):
        raise ConfigError(f"invalid reward kind {cfg['reward']['kind']!r}")
    if not cfg["benchmark"]["n_grid"]:
        raise ConfigError("benchmark.n_grid must be nonempty")
    if int(cfg["max_new_tokens"]) < 1:
        raise ConfigError("max_new_tokens must be >= 1")
    if int(cfg["correlate"]["n_samples"]) < 2:
        raise ConfigError("correlate.n_samples must be >= 2")


def resolve_path(cfg: dict, value: str | None) -> Path | None:
    if value is None:
        return None
    if value.startswith(DATA_PREFIX):
        return DATA_DIR / value[len(DATA_PREFIX):]
    p = Path(value)
    return p if p.is_absolute() else Path(cfg["_base_dir"]) / p


def public(cfg: dict) -> dict:
    """Config as recorded in reports (no machine-specific entries)."""
    return {k: v for k, v in cfg.items() if not k.startswith("_") and k not in ("jobs", "out")}
