"""Vocabulary, auto-regressive models and batched ancestral sampling.

Two model families share one interface:

* :class:`NGramModel` -- word-level n-gram counts with additive smoothing and
  recursive backoff, trained from a plain-text corpus.
* :class:`ScriptedModel` -- a fixed prefix tree of responses with given
  per-step probabilities. Used for deterministic fixtures.

Both expose ``next_token_dist(context)``. Internally each distinct context is
resolved to a cached row holding the probability vector, its CDF and its
log-probabilities, so the scalar and batched sampling paths read exactly the
same numbers.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence as Seq

import numpy as np

from .rng import StreamKey, uniform_batch

UNK = "<unk>"
EOS = "<eos>"

MODEL_FORMAT = "specrej-ngram"
SCRIPTED_FORMAT = "specrej-scripted"
MODEL_VERSION = 1

DEFAULT_MAX_NEW_TOKENS = 256


class ModelError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    return text.split()


class Vocabulary:
    """Ordered token alphabet. ``<unk>`` is id 0 and ``<eos>`` is id 1."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.tokens: list[str] = [UNK, EOS]
        self.index: dict[str, int] = {UNK: 0, EOS: 1}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if token not in self.index:
            self.index[token] = len(self.tokens)
            self.tokens.append(token)
        return self.index[token]

    @property
    def unk_id(self) -> int:
        return 0

    @property
    def eos_id(self) -> int:
        return 1

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def encode(self, text: str | Seq[str], add_eos: bool = False) -> list[int]:
        toks = tokenize(text) if isinstance(text, str) else list(text)
        ids = [self.index.get(t, 0) for t in toks]
        if add_eos and (not ids or ids[-1] != self.eos_id):
            ids.append(self.eos_id)
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(self.tokens[i] for i in ids)

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocabulary":
        vocab = cls()
        for text in texts:
            for tok in tokenize(text):
                vocab.add(tok)
        return vocab


ACTIVE = "active"
COMPLETED = "completed"
REJECTED = "rejected"


@dataclass
class Sequence:
    """One response under generation for a fixed prompt.

    ``cum_log_prob`` is accumulated token by token, in nats.
    """

    index: int
    prompt: tuple[int, ...]
    max_new_tokens: int
    eos_id: int = 1
    generated: list[int] = field(default_factory=list)
    step_log_probs: list[float] = field(default_factory=list)
    cum_log_prob: float = 0.0
    status: str = ACTIVE

    @property
    def length(self) -> int:
        return len(self.generated)

    @property
    def is_active(self) -> bool:
        return self.status == ACTIVE

    def append(self, token: int, log_prob: float) -> None:
        if self.status != ACTIVE:
            raise ModelError(f"cannot extend a {self.status} sequence")
        self.generated.append(token)
        self.step_log_probs.append(log_prob)
        self.cum_log_prob += log_prob
        if token == self.eos_id or len(self.generated) >= self.max_new_tokens:
            self.status = COMPLETED

    def reject(self) -> None:
        if self.status == ACTIVE:
            self.status = REJECTED

    def prefix(self, length: int) -> "Sequence":
        """Copy truncated to the first ``length`` generated tokens."""
        length = min(length, self.length)
        out = Sequence(self.index, self.prompt, self.max_new_tokens, self.eos_id)
        for tok, lp in zip(self.generated[:length], self.step_log_probs[:length]):
            out.generated.append(tok)
            out.step_log_probs.append(lp)
            out.cum_log_prob += lp
        done = length == self.length and self.status == COMPLETED
        out.status = COMPLETED if done else ACTIVE
        return out


class LanguageModel:
    """Shared machinery: context resolution, cached rows, sampling tables."""

    vocab: Vocabulary

    def _init_cache(self) -> None:
        self._key_rows: dict[tuple, int] = {}
        self._probs: list[np.ndarray] = []
        self._cdfs: list[np.ndarray] = []
        self._logps: list[np.ndarray] = []
        self._last: list[int] = []

    # subclasses: map (prompt, generated) to a cache key, and a key to probabilities
    def _context_key(self, context: Seq[int]) -> tuple:
        raise NotImplementedError

    def _key_for(self, prompt: tuple, generated: list) -> tuple:
        return self._context_key(prompt + tuple(generated))

    def _compute_probs(self, key: tuple) -> np.ndarray:
        raise NotImplementedError

    def _row(self, key: tuple) -> int:
        row = self._key_rows.get(key)
        if row is None:
            probs = self._compute_probs(key)
            row = len(self._probs)
            self._probs.append(probs)
            self._cdfs.append(np.cumsum(probs))
            with np.errstate(divide="ignore"):
                self._logps.append(np.log(probs))
            self._last.append(int(np.flatnonzero(probs)[-1]))
            self._key_rows[key] = row
        return row

    def _check_ids(self, ids: Iterable[int]) -> None:
        size = len(self.vocab)
        for t in ids:
            if not 0 <= int(t) < size:
                raise ModelError("unknown token id")

    def next_token_dist(self, context: Seq[int]) -> np.ndarray:
        self._check_ids(context)
        return self._probs[self._row(self._context_key(tuple(context)))].copy()

    def sample_next(self, context: Seq[int], stream: StreamKey) -> tuple[int, float]:
        """Inverse-CDF draw; returns ``(token, log_prob)``."""
        self._check_ids(context)
        row = self._row(self._context_key(tuple(context)))
        tok = int(np.searchsorted(self._cdfs[row], stream.uniform(), side="right"))
        tok = min(tok, self._last[row])
        return tok, float(self._logps[row][tok])

    def step_log_prob(self, context: Seq[int], token: int) -> float:
        row = self._row(self._context_key(tuple(context)))
        return float(self._logps[row][token])


def next_token_dist(model: LanguageModel, context: Seq[int]) -> np.ndarray:
    return model.next_token_dist(context)


def sample_next(model: LanguageModel, context: Seq[int], stream: StreamKey) -> int:
    return model.sample_next(context, stream)[0]


def sequence_log_prob(model: LanguageModel, prompt: Seq[int], response: Seq[int]) -> float:
    """Re-score ``response`` given ``prompt``: sum of per-step log conditionals."""
    if len(response) == 0:
        raise ModelError("empty response")
    model._check_ids(prompt)
    model._check_ids(response)
    prompt = tuple(prompt)
    total = 0.0
    for k, tok in enumerate(response):
        row = model._row(model._key_for(prompt, list(response[:k])))
        total += float(model._logps[row][tok])
    return total


class NGramModel(LanguageModel):
    """Additive-smoothed n-gram with recursive backoff to shorter contexts.

    ``counts`` maps every context tuple of length ``0..order-1`` seen in
    training to a ``{token_id: count}`` table. A context whose table is empty
    backs off by dropping its oldest token, down to the unigram table.
    """

    def __init__(self, vocab: Vocabulary, order: int, smoothing: float, counts: dict):
        if order < 1:
            raise ModelError("invalid order")
        if not smoothing > 0:
            raise ModelError("invalid smoothing")
        self.vocab = vocab
        self.order = order
        self.smoothing = float(smoothing)
        self.counts: dict[tuple, dict[int, int]] = counts
        self.totals = {ctx: sum(tab.values()) for ctx, tab in counts.items()}
        self._init_cache()

    def _context_key(self, context):
        n = self.order - 1
        return tuple(context[len(context) - n:]) if n else ()

    def _key_for(self, prompt, generated):
        n = self.order - 1
        if n == 0:
            return ()
        if len(generated) >= n:
            return tuple(generated[-n:])
        return (prompt + tuple(generated))[-n:]

    def resolve(self, key: tuple) -> tuple:
        """Longest suffix of ``key`` that was observed as a context."""
        while key and self.totals.get(key, 0) == 0:
            key = key[1:]
        return key

    def _compute_probs(self, key):
        ctx = self.resolve(key)
        size = len(self.vocab)
        probs = np.full(size, self.smoothing)
        for tok, c in self.counts.get(ctx, {}).items():
            probs[tok] += c
        return probs / (self.totals.get(ctx, 0) + self.smoothing * size)

    def _row(self, key):
        row = self._key_rows.get(key)
        if row is None:
            ctx = self.resolve(key)
            row = LanguageModel._row(self, ctx)
            self._key_rows[key] = row
        return row

    def to_dict(self) -> dict:
        counts = [
            [list(ctx), sorted([int(t), int(c)] for t, c in tab.items())]
            for ctx, tab in sorted(self.counts.items(), key=lambda kv: (len(kv[0]), kv[0]))
        ]
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "order": self.order,
            "smoothing": self.smoothing,
            "vocab": self.vocab.tokens,
            "counts": counts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NGramModel":
        if data.get("format") != MODEL_FORMAT:
            raise ModelError("not an n-gram model file")
        if data.get("version") != MODEL_VERSION:
            raise ModelError(f"unsupported model version {data.get('version')!r}")
        tokens = data["vocab"]
        if tokens[:2] != [UNK, EOS]:
            raise ModelError("model vocabulary must start with <unk>, <eos>")
        vocab = Vocabulary(tokens[2:])
        counts = {tuple(ctx): {t: c for t, c in tab} for ctx, tab in data["counts"]}
        return cls(vocab, data["order"], data["smoothing"], counts)


def train_ngram(corpus: Seq[Seq[str]], order: int, smoothing: float,
                vocab: Vocabulary | None = None) -> NGramModel:
    """Count n-grams of every length up to ``order`` over tokenized documents.

    Each document is a token-string sequence ending with ``<eos>``.
    """
    if order < 1:
        raise ModelError("invalid order")
    if not smoothing > 0:
        raise ModelError("invalid smoothing")
    docs = [list(d) for d in corpus]
    if not docs or all(len(d) == 0 for d in docs):
        raise ModelError("empty corpus")
    for d in docs:
        if not d or d[-1] != EOS:
            raise ModelError("every document must end with <eos>")
    if vocab is None:
        vocab = Vocabulary(t for d in docs for t in d)
    counts: dict[tuple, dict[int, int]] = defaultdict(lambda: defaultdict(int))
    for d in docs:
        ids = vocab.encode(d)
        for i, tok in enumerate(ids):
            for j in range(min(order, i + 1)):
                counts[tuple(ids[i - j:i])][tok] += 1
    return NGramModel(vocab, order, smoothing, {k: dict(v) for k, v in counts.items()})


def read_corpus(path: str | Path) -> list[list[str]]:
    """One document per non-blank line, ``<eos>`` appended."""
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            toks = tokenize(line)
            if toks:
                if toks[-1] != EOS:
                    toks.append(EOS)
                docs.append(toks)
    return docs


def save_model(model: NGramModel, path: str | Path) -> None:
    text = json.dumps(model.to_dict(), sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_model(path: str | Path) -> LanguageModel:
    """Load either a trained n-gram dump or a scripted fixture."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("format") == SCRIPTED_FORMAT:
        return ScriptedModel.from_dict(data)
    return NGramModel.from_dict(data)


class ScriptedModel(LanguageModel):
    """Deterministic model defined by a prefix tree of scripted responses.

    At a scripted context each child token gets its scripted probability;
    any mass left over goes to ``<unk>``. Off-script contexts put all mass on
    ``<eos>``.
    """

    def __init__(self, vocab: Vocabulary, scripts: dict):
        self.vocab = vocab
        self.scripts = scripts
        self.tree: dict[tuple, dict[int, float]] = {}
        for prompt, responses in scripts.items():
            for tokens, probs in responses:
                if len(tokens) != len(probs) or not tokens:
                    raise ModelError("scripted response needs one probability per token")
                if tokens[-1] != vocab.eos_id:
                    raise ModelError("scripted response must end with <eos>")
                for k, (tok, p) in enumerate(zip(tokens, probs)):
                    if not 0 < p <= 1:
                        raise ModelError("scripted probabilities must lie in (0, 1]")
                    node = self.tree.setdefault(tuple(prompt) + tuple(tokens[:k]), {})
                    if node.get(tok, p) != p:
                        raise ModelError("conflicting probabilities for a shared prefix")
                    node[tok] = p
        for node in self.tree.values():
            if sum(node.values()) > 1 + 1e-12:
                raise ModelError("scripted probabilities at a branch exceed 1")
        self._init_cache()

    def _context_key(self, context):
        return tuple(context)

    def _compute_probs(self, key):
        probs = np.zeros(len(self.vocab))
        node = self.tree.get(key)
        if node is None:
            probs[self.vocab.eos_id] = 1.0
            return probs
        for tok, p in node.items():
            probs[tok] = p
        rest = 1.0 - probs.sum()
        if rest > 1e-15:
            probs[self.vocab.unk_id] += rest
        return probs

    @classmethod
    def from_texts(cls, table: dict[str, list[tuple[str, Seq[float]]]]) -> "ScriptedModel":
        """Build from ``{prompt_text: [(response_text, probs), ...]}``."""
        vocab = Vocabulary()
        for prompt, responses in table.items():
            for tok in tokenize(prompt):
                vocab.add(tok)
            for text, _ in responses:
                for tok in tokenize(text):
                    vocab.add(tok)
        scripts = {
            tuple(vocab.encode(prompt)): [(vocab.encode(text), list(probs)) for text, probs in responses]
            for prompt, responses in table.items()
        }
        return cls(vocab, scripts)

    @classmethod
    def from_dict(cls, data: dict) -> "ScriptedModel":
        if data.get("version") != MODEL_VERSION:
            raise ModelError(f"unsupported fixture version {data.get('version')!r}")
        table = {
            entry["prompt"]: [(r["text"], r["probs"]) for r in entry["responses"]]
            for entry in data["prompts"]
        }
        return cls.from_texts(table)

    def to_dict(self) -> dict:
        return {
            "format": SCRIPTED_FORMAT,
            "version": MODEL_VERSION,
            "prompts": [
                {
                    "prompt": self.vocab.decode(prompt),
                    "responses": [{"text": self.vocab.decode(t), "probs": list(p)} for t, p in resp],
                }
                for prompt, resp in self.scripts.items()
            ],
        }


def new_sequences(model: LanguageModel, prompt: Seq[int], indices: Iterable[int],
                  max_new_tokens: int) -> list[Sequence]:
    if max_new_tokens < 1:
        raise ModelError("max_new_tokens must be >= 1")
    model._check_ids(prompt)
    prompt = tuple(int(t) for t in prompt)
    return [Sequence(i, prompt, max_new_tokens, model.vocab.eos_id) for i in indices]


def extend(model: LanguageModel, seqs: list[Sequence], seed: int) -> None:
    """Generate one token for every sequence in ``seqs`` (all must be active).

    The draw for sequence ``s`` at step ``s.length`` comes from stream
    ``(seed, s.index, s.length)``, so the result does not depend on which
    other sequences share the batch.
    """
    if not seqs:
        return
    rows = [model._row(model._key_for(s.prompt, s.generated)) for s in seqs]
    u = uniform_batch(seed, [s.index for s in seqs], [s.length for s in seqs])
    cdf = np.stack([model._cdfs[r] for r in rows])
    toks = (cdf <= u[:, None]).sum(axis=1)
    toks = np.minimum(toks, np.array([model._last[r] for r in rows]))
    for s, r, t in zip(seqs, rows, toks.tolist()):
        s.append(t, float(model._logps[r][t]))


def generate(model: LanguageModel, prompt: Seq[int], indices: Iterable[int], seed: int,
             max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS) -> list[Sequence]:
    """Run every stream in ``indices`` to completion."""
    seqs = new_sequences(model, prompt, indices, max_new_tokens)
    active = list(seqs)
    while active:
        extend(model, active, seed)
        active = [s for s in active if s.is_active]
    return seqs


def generate_one(model: LanguageModel, prompt: Seq[int], index: int, seed: int,
                 max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS) -> Sequence:
    """Scalar reference path: one sequence, one :func:`sample_next` per step."""
    (seq,) = new_sequences(model, prompt, [index], max_new_tokens)
    while seq.is_active:
        ctx = seq.prompt + tuple(seq.generated)
        tok, lp = model.sample_next(ctx, StreamKey(seed, index, seq.length))
        seq.append(tok, lp)
    return seq
