import json
from pathlib import Path

import pytest

from specrej.lm_core import ScriptedModel, load_model, read_corpus, train_ngram
from specrej.reward import LexicalReward, load_lexical_table

DATA = Path(__file__).resolve().parents[1] / "src" / "specrej" / "data"

# seed under which stream 0 takes the first scripted branch and stream 1 the second
WORKED_EXAMPLE_SEED = 2


@pytest.fixture(scope="session")
def reference_docs():
    return read_corpus(DATA / "reference_corpus.txt")


@pytest.fixture(scope="session")
def reference_model(reference_docs):
    return train_ngram(reference_docs, 3, 0.01)


@pytest.fixture(scope="session")
def reference_prompts():
    with open(DATA / "prompts.jsonl", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@pytest.fixture(scope="session")
def lexical_table():
    return load_lexical_table(DATA / "lexical_reward.tsv")


@pytest.fixture
def tiny_model():
    docs = [s.split() + ["<eos>"] for s in ["a b c", "a c b", "b a c a", "c c a b", "a"]]
    return train_ngram(docs, 2, 0.1)


@pytest.fixture(scope="session")
def worked_example():
    model = load_model(DATA / "worked_example.json")
    reward = LexicalReward(load_lexical_table(DATA / "worked_example_reward.tsv"), model.vocab)
    prompt = next(iter(model.scripts))
    return model, reward, list(prompt)


def monotone_scripted(n_responses=6, length=5):
    """Responses ``r_k = w_k w_k ... <eos>`` with equal branch probabilities.

    Under a lexical reward where ``w_k`` weighs ``k``, every prefix ranks the
    responses exactly as their final scores do.
    """
    p = 1.0 / n_responses
    table = {
        "q": [(" ".join([f"w{k}"] * length + ["<eos>"]), [p] + [1.0] * length)
              for k in range(n_responses)]
    }
    return ScriptedModel.from_texts(table)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
