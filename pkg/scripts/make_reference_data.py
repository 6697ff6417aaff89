"""Regenerate the reference corpus, prompt set and lexical reward table.

Documents are short question/answer exchanges. Each answer has a tone
(helpful or dismissive) that usually persists from one sentence to the next
but can switch, so the opening of a response says something, but not
everything, about how the whole response will score.

    python scripts/make_reference_data.py [--out src/specrej/data]
"""

import argparse
import json
import random
from pathlib import Path

SEED = 20240611

OPENERS = [
    "how can i", "how do i", "what is the best way to", "can you help me",
    "please tell me how to", "i want to", "is it possible to", "what should i do to",
    "explain how to", "give me advice on how to",
]
VERBS = ["fix", "learn", "cook", "clean", "build", "plan", "write", "improve",
         "repair", "paint", "organize", "grow", "train", "sell", "move", "start"]
OBJECTS = ["my bike", "a cake", "the garden", "my essay", "a small shed", "the kitchen",
           "my budget", "a website", "the old car", "my resume", "a vegetable bed",
           "the dog", "my house", "a short story", "the fence", "a business",
           "my laptop", "the basement", "a trip", "my schedule"]

HELPFUL = {
    "start": ["sure ,", "of course ,", "happy to help ,", "great question ,", "good idea ,", "absolutely ,"],
    "adv": ["carefully", "safely", "patiently", "gently", "slowly", "thoroughly", "calmly"],
    "verb": ["check", "measure", "prepare", "clean", "review", "gather", "test", "plan"],
    "obj": ["the parts", "each step", "your tools", "the materials", "a clear list", "the details",
            "a simple plan", "the instructions"],
    "link": ["and then", "so that you can", "before you", "which helps you"],
    "end": ["finish the job", "stay safe", "avoid mistakes", "get a great result",
            "save time", "learn a lot", "enjoy the process"],
    "close": ["good luck !", "hope this helps !", "you can do it !", "feel free to ask more ."],
}
DISMISSIVE = {
    "start": ["no ,", "ugh ,", "whatever ,", "honestly ,", "why bother ,", "nah ,"],
    "adv": ["lazily", "randomly", "badly", "carelessly", "quickly", "roughly"],
    "verb": ["ignore", "skip", "break", "throw away", "forget", "guess"],
    "obj": ["the parts", "each step", "your tools", "the instructions", "the whole thing",
            "the details", "that stupid plan"],
    "link": ["and then", "because", "until you", "so you can"],
    "end": ["give up", "waste your time", "make it worse", "fail again", "regret it",
            "hate the result"],
    "close": ["not my problem .", "figure it out yourself .", "stop asking .", "this is pointless ."],
}
NEUTRAL = [
    "the {o} usually takes a few hours .",
    "most people start with the basics .",
    "it depends on the time you have .",
    "some tools are needed for {o} .",
    "there are many ways to do this .",
]

POSITIVE_WEIGHTS = {
    "sure": 1.0, "course": 0.6, "happy": 1.2, "help": 0.8, "great": 1.0, "good": 0.9,
    "absolutely": 0.8, "idea": 0.3, "question": 0.3, "carefully": 0.9, "safely": 1.1,
    "patiently": 0.8, "gently": 0.7, "slowly": 0.3, "thoroughly": 0.8, "calmly": 0.6,
    "check": 0.5, "measure": 0.4, "prepare": 0.5, "review": 0.4, "gather": 0.3,
    "test": 0.4, "clear": 0.6, "simple": 0.4, "helps": 0.8, "safe": 1.0, "avoid": 0.5,
    "result": 0.3, "save": 0.4, "learn": 0.3, "enjoy": 0.9, "luck": 0.8, "hope": 0.7,
    "can": 0.2, "feel": 0.3, "free": 0.3, "!": 0.4,
}
NEGATIVE_WEIGHTS = {
    "no": -0.9, "ugh": -1.2, "whatever": -1.0, "honestly": -0.3, "bother": -0.9,
    "nah": -1.0, "lazily": -0.9, "randomly": -0.6, "badly": -1.1, "carelessly": -1.2,
    "roughly": -0.4, "ignore": -0.9, "skip": -0.6, "break": -1.0, "throw": -0.7,
    "away": -0.3, "forget": -0.7, "guess": -0.5, "stupid": -1.5, "whole": -0.2,
    "give": -0.2, "up": -0.6, "waste": -1.1, "worse": -1.2, "fail": -1.1,
    "regret": -1.0, "hate": -1.4, "problem": -0.6, "yourself": -0.4, "stop": -0.8,
    "asking": -0.3, "pointless": -1.3,
}


def question(rng):
    return f"{rng.choice(OPENERS)} {rng.choice(VERBS)} {rng.choice(OBJECTS)}"


def sentence(rng, tone, obj):
    if tone == "neutral":
        return rng.choice(NEUTRAL).format(o=obj.split()[-1])
    g = HELPFUL if tone == "helpful" else DISMISSIVE
    parts = [rng.choice(g["adv"]), rng.choice(g["verb"]), rng.choice(g["obj"])]
    if rng.random() < 0.6:
        parts += [rng.choice(g["link"]), rng.choice(g["end"])]
    return " ".join(parts) + " ."


def answer(rng, obj):
    tone = "helpful" if rng.random() < 0.5 else "dismissive"
    g = HELPFUL if tone == "helpful" else DISMISSIVE
    words = [rng.choice(g["start"])]
    n_sent = 2 + min(int(rng.expovariate(0.6)), 4)
    for _ in range(n_sent):
        r = rng.random()
        if r < 0.15:
            words.append(sentence(rng, "neutral", obj))
        else:
            if r > 0.8:
                tone = "dismissive" if tone == "helpful" else "helpful"
            words.append(sentence(rng, tone, obj))
    if rng.random() < 0.5:
        words.append(rng.choice((HELPFUL if tone == "helpful" else DISMISSIVE)["close"]))
    return " ".join(words)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/specrej/data"))
    ap.add_argument("--docs", type=int, default=4000)
    ap.add_argument("--prompts", type=int, default=100)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)

    lines = []
    for _ in range(args.docs):
        q = question(rng)
        lines.append(f"{q} ? {answer(rng, q)}")
    (out / "reference_corpus.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    prompt_rng = random.Random(SEED + 1)
    seen = set()
    with open(out / "prompts.jsonl", "w", encoding="utf-8") as fh:
        while len(seen) < args.prompts:
            q = question(prompt_rng) + " ?"
            if q in seen:
                continue
            seen.add(q)
            fh.write(json.dumps({"id": f"p{len(seen) - 1:03d}", "prompt": q}) + "\n")

    weights = {**POSITIVE_WEIGHTS, **NEGATIVE_WEIGHTS}
    with open(out / "lexical_reward.tsv", "w", encoding="utf-8") as fh:
        fh.write("# desk-scale reward: helpful words score up, dismissive words down\n")
        fh.write("@gamma\t0.98\n@bias\t0.0\n")
        for tok in sorted(weights):
            fh.write(f"{tok}\t{weights[tok]}\n")


if __name__ == "__main__":
    main()
