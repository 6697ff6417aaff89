"""Command line entry point: ``specrej {train,generate,benchmark,correlate}``.

Any config field can be overridden with a flag of its dotted name, e.g.
``--budget.initial_batch 32`` or ``--benchmark.n_grid "[8, 16]"``.
Failures exit nonzero with a one-line JSON error on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..decoding import DecodeError
from ..lm_core import ModelError
from ..memory_model import BudgetError
from ..metrics import MetricError
from ..reward import RewardError
from . import experiments as ex
from .config import ConfigError, load_config, parse_value

EXIT_USAGE = 2
EXIT_FAILURE = 1


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="YAML experiment config")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--alpha", type=float, metavar="F")
    p.add_argument("--n", type=int, metavar="U32")
    p.add_argument("--budget-capacity", type=int, metavar="U64")
    p.add_argument("--max-new-tokens", type=int, metavar="U32")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--jobs", type=int, metavar="K", help="worker processes (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="specrej", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train an n-gram model from a text corpus")
    p.add_argument("--corpus", required=True, metavar="PATH")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--smoothing", type=float, default=0.01)
    p.add_argument("--model-out", required=True, metavar="PATH")

    p = sub.add_parser("generate", help="decode one prompt and write report.json")
    _common(p)
    p.add_argument("--strategy", choices=["bon", "specrej"])
    p.add_argument("--prompt", help="prompt text (default: first prompt of the prompt set)")
    p.add_argument("--prompt-id")

    p = sub.add_parser("benchmark", help="Best-of-N grid vs Speculative Rejection over a prompt set")
    _common(p)

    p = sub.add_parser("correlate", help="partial vs final reward correlation per prompt")
    _common(p)
    p.add_argument("--tau", type=int, metavar="TOKENS")
    p.add_argument("--n-samples", type=int)
    return parser


def _split_overrides(extra: list[str]) -> dict:
    out = {}
    i = 0
    while i < len(extra):
        arg = extra[i]
        if not arg.startswith("--") or len(arg) == 2:
            raise CliError(f"unrecognized argument {arg!r}")
        if "=" in arg:
            key, value = arg[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise CliError(f"missing value for {arg}")
            key, value = arg[2:], extra[i + 1]
            i += 2
        out[key] = parse_value(value)
    return out


def _config(args, extra) -> dict:
    try:
        overrides = _split_overrides(extra)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    named = {
        "seed": args.seed,
        "alpha": args.alpha,
        "n": args.n,
        "budget.capacity": args.budget_capacity,
        "max_new_tokens": args.max_new_tokens,
        "out": args.out,
        "jobs": args.jobs,
        "strategy": getattr(args, "strategy", None),
        "correlate.tau": getattr(args, "tau", None),
        "correlate.n_samples": getattr(args, "n_samples", None),
    }
    overrides.update({k: v for k, v in named.items() if v is not None})
    return load_config(args.config, overrides)


def run(argv: list[str]) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    if args.command == "train":
        if extra:
            raise CliError(f"unrecognized arguments: {' '.join(extra)}")
        model = ex.run_train(args.corpus, args.order, args.smoothing, args.model_out)
        print(json.dumps({"model": args.model_out, "vocab_size": len(model.vocab), "order": model.order}))
        return 0

    cfg = _config(args, extra)
    out = Path(cfg["out"])
    if args.command == "generate":
        report = ex.run_generate(cfg, args.prompt, args.prompt_id)
        files = {"report.json": ex.dump_json(report)}
    elif args.command == "benchmark":
        report = ex.run_benchmark(cfg)
        files = {"benchmark.json": ex.dump_json(report), "benchmark.csv": ex.benchmark_csv(report)}
    else:
        report = ex.run_correlate(cfg)
        scatter, per_prompt = ex.correlation_csvs(report)
        files = {
            "correlation.json": ex.dump_json(report),
            "correlation_scatter.csv": scatter,
            "correlation_per_prompt.csv": per_prompt,
        }
    written = ex.write_outputs(out, files)
    print(json.dumps({"command": args.command, "outputs": [str(p) for p in written]}))
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run(argv)
    except CliError as exc:
        err, code = {"error": "usage", "message": str(exc)}, EXIT_USAGE
    except (ConfigError, ModelError, RewardError, BudgetError, DecodeError, MetricError) as exc:
        err, code = {"error": type(exc).__name__, "message": str(exc)}, EXIT_FAILURE
    except OSError as exc:
        err, code = {"error": "io", "message": f"{exc.filename}: {exc.strerror}"}, EXIT_FAILURE
    print(json.dumps(err), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
