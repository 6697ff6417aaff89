"""
Training and sampling a word-level n-gram model
===============================================

Fits a trigram model to the shipped corpus and draws a few responses.
Each response ``k`` reads its random numbers from stream ``(seed, k)``,
so rerunning the script prints the same text.
"""

from pathlib import Path

import numpy as np

import specrej
from specrej.lm_core import generate, read_corpus, train_ngram

data = Path(specrej.__file__).parent / "data"
docs = read_corpus(data / "reference_corpus.txt")
model = train_ngram(docs, order=3, smoothing=0.01)
print(f"{len(docs)} documents, vocabulary of {len(model.vocab)} tokens")

# the most likely continuations of a two-word context
ctx = model.vocab.encode("you can")
dist = model.next_token_dist(ctx)
top = np.argsort(dist)[::-1][:5]
for t in top:
    print(f"  P({model.vocab.tokens[t]!r} | 'you can') = {dist[t]:.3f}")

prompt = model.vocab.encode("how do i fix my bike ?")
for s in generate(model, prompt, range(3), seed=7, max_new_tokens=40):
    print(f"[{s.index}] {s.cum_log_prob:8.2f}  {model.vocab.decode(s.generated)}")
