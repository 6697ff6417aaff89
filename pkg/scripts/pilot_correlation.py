"""Standalone pilot for the partial-vs-final reward correlation experiment.

Re-derives everything the library does with plain Python loops (no numpy and
no imports from the package): trigram counts with additive smoothing and
backoff, counter-stream sampling, the discounted lexical reward and Pearson's
r. The median per-prompt Pearson it prints is the reference value that the
acceptance suite compares the library against.

    python3 scripts/pilot_correlation.py [--prompts 100] [--samples 200] [--max-new-tokens 64]
"""

import argparse
import bisect
import hashlib
import json
import math
import statistics
import time
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "specrej" / "data"
M64 = (1 << 64) - 1


def mix(x):
    x = (x + 0x9E3779B97F4A7C15) & M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & M64
    return x ^ (x >> 31)


def draw(seed, index, step):
    k = mix(mix(mix(seed) ^ index) ^ step)
    return (k >> 11) / 2.0**53


def prompt_seed(run_seed, prompt_id):
    h = int.from_bytes(hashlib.blake2b(prompt_id.encode(), digest_size=8).digest(), "little")
    return mix(run_seed ^ h)


class Trigram:
    def __init__(self, lines, delta):
        self.words = ["<unk>", "<eos>"]
        self.ids = {"<unk>": 0, "<eos>": 1}
        docs = []
        for line in lines:
            doc = []
            for w in line.split() + ["<eos>"]:
                if w not in self.ids:
                    self.ids[w] = len(self.words)
                    self.words.append(w)
                doc.append(self.ids[w])
            docs.append(doc)
        self.table = {}
        for doc in docs:
            for i, t in enumerate(doc):
                for n in range(0, min(2, i) + 1):
                    ctx = tuple(doc[i - n:i])
                    row = self.table.setdefault(ctx, {})
                    row[t] = row.get(t, 0) + 1
        self.delta = delta
        self.cache = {}

    def cdf(self, ctx):
        ctx = tuple(ctx[-2:])
        got = self.cache.get(ctx)
        if got is not None:
            return got
        used = ctx
        while used and used not in self.table:
            used = used[1:]
        row = self.table.get(used, {})
        total = sum(row.values())
        V = len(self.words)
        denom = total + self.delta * V
        probs = [(self.delta + row.get(t, 0)) / denom for t in range(V)]
        acc, run = [], 0.0
        for p in probs:
            run += p
            acc.append(run)
        self.cache[ctx] = (acc, probs)
        return acc, probs


def sample_response(model, prompt, seed, index, max_new):
    out = []
    while len(out) < max_new:
        acc, _ = model.cdf(prompt + out)
        t = min(bisect.bisect_right(acc, draw(seed, index, len(out))), len(acc) - 1)
        out.append(t)
        if t == 1:
            break
    return out


def read_weights(path):
    w, gamma, bias = {}, 1.0, 0.0
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, val = line.split("\t")
        if key == "@gamma":
            gamma = float(val)
        elif key == "@bias":
            bias = float(val)
        else:
            w[key] = float(val)
    return w, gamma, bias


def lexical(words, tokens, weights, gamma, bias):
    return math.fsum([bias] + [gamma**i * weights.get(words[t], 0.0) for i, t in enumerate(tokens)])


def pearson(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        return None
    return sxy / math.sqrt(sxx * syy)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--prompts", type=int, default=100)
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--max-new-tokens", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--gamma", type=float, default=0.98)
    args = ap.parse_args()
    tau = args.max_new_tokens // 2

    t0 = time.time()
    lines = [l for l in (DATA / "reference_corpus.txt").read_text().splitlines() if l.strip()]
    model = Trigram(lines, 0.01)
    weights, _, bias = read_weights(DATA / "lexical_reward.tsv")
    prompts = [json.loads(l) for l in (DATA / "prompts.jsonl").read_text().splitlines() if l.strip()]

    rs, lengths = [], []
    for entry in prompts[: args.prompts]:
        p = [model.ids.get(w, 0) for w in entry["prompt"].split()]
        seed = prompt_seed(args.seed, entry["id"])
        partial, final = [], []
        for k in range(args.samples):
            resp = sample_response(model, p, seed, k, args.max_new_tokens)
            lengths.append(len(resp))
            partial.append(lexical(model.words, resp[:tau], weights, args.gamma, bias))
            final.append(lexical(model.words, resp, weights, args.gamma, bias))
        r = pearson(partial, final)
        if r is not None:
            rs.append(r)
    print(json.dumps({
        "prompts": args.prompts,
        "samples": args.samples,
        "max_new_tokens": args.max_new_tokens,
        "tau": tau,
        "defined": len(rs),
        "median_pearson": statistics.median(rs),
        "mean_pearson": statistics.fmean(rs),
        "share_longer_than_tau": sum(n > tau for n in lengths) / len(lengths),
        "seconds": round(time.time() - t0, 1),
    }, indent=1))


if __name__ == "__main__":
    main()
