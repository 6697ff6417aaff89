import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specrej.lm_core import (
    EOS,
    COMPLETED,
    ModelError,
    NGramModel,
    ScriptedModel,
    Vocabulary,
    extend,
    generate,
    generate_one,
    load_model,
    new_sequences,
    next_token_dist,
    sample_next,
    save_model,
    sequence_log_prob,
    train_ngram,
)
from specrej.rng import StreamKey

from oracles import count_prob


def test_vocabulary_reserved_ids():
    v = Vocabulary(["a", "b", "a"])
    assert v.tokens == ["<unk>", "<eos>", "a", "b"]
    assert v.encode("a zz b") == [2, 0, 3]
    assert v.encode("a", add_eos=True) == [2, 1]
    assert v.decode([2, 3, 1]) == "a b <eos>"


def test_unigram_smoothing_by_hand():
    # |V| = 4: <unk>, <eos>, a, b
    m = train_ngram([["a", "b", EOS]], 1, 1.0)
    dist = m.next_token_dist([])
    assert dist[m.vocab.index["a"]] == pytest.approx((1 + 1) / (3 + 4), abs=1e-15)
    assert dist[m.vocab.unk_id] == pytest.approx(1 / 7, abs=1e-15)


def test_degenerate_corpus_concentrates_mass():
    m = train_ngram([["x"] * 1000 + [EOS]], 1, 1e-6)
    assert m.next_token_dist([])[m.vocab.index["x"]] == pytest.approx(1000 / 1001, abs=1e-6)


def test_bigram_matches_count_oracle():
    docs = [["a", "a", EOS], ["a", "b", EOS]]
    m = train_ngram(docs, 2, 1.0)
    ids = [m.vocab.encode(d) for d in docs]
    a, b = m.vocab.index["a"], m.vocab.index["b"]
    expected = count_prob(ids, 2, 1.0, len(m.vocab), [a], b)
    assert expected == pytest.approx(2 / 7)  # count(a, b)=1 out of count(a, .)=3
    assert m.next_token_dist([a])[b] == pytest.approx(expected, abs=1e-15)


def test_trigram_backoff_matches_count_oracle(reference_docs):
    docs = reference_docs[:200]
    m = train_ngram(docs, 3, 0.05)
    ids = [m.vocab.encode(d) for d in docs]
    rng = np.random.default_rng(3)
    V = len(m.vocab)
    for _ in range(40):
        ctx = [int(t) for t in rng.integers(0, V, size=rng.integers(0, 4))]
        tok = int(rng.integers(0, V))
        assert m.next_token_dist(ctx)[tok] == pytest.approx(
            count_prob(ids, 3, 0.05, V, ctx, tok), rel=1e-12)


def test_train_errors():
    with pytest.raises(ModelError, match="empty corpus"):
        train_ngram([], 2, 1.0)
    with pytest.raises(ModelError, match="invalid order"):
        train_ngram([["a", EOS]], 0, 1.0)
    with pytest.raises(ModelError):
        train_ngram([["a", "b"]], 2, 1.0)


def test_uniform_model_with_no_counts():
    v = Vocabulary(["a", "b"])
    m = NGramModel(v, 1, 0.5, {})
    np.testing.assert_array_equal(m.next_token_dist([]), np.full(4, 0.25))
    assert sequence_log_prob(m, [2], [2, 3, 1]) == pytest.approx(3 * math.log(0.25), abs=1e-12)
    assert sequence_log_prob(m, [2], [2, 3, 1]) == pytest.approx(-4.158883, abs=1e-6)


def test_unknown_token_id(tiny_model):
    with pytest.raises(ModelError, match="unknown token id"):
        next_token_dist(tiny_model, [99])
    with pytest.raises(ModelError, match="empty response"):
        sequence_log_prob(tiny_model, [2], [])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=188), max_size=6))
def test_reference_model_normalized(reference_model, ctx):
    dist = reference_model.next_token_dist(ctx)
    assert dist.shape == (len(reference_model.vocab),)
    assert (dist >= 0).all()
    assert math.fsum(dist.tolist()) == pytest.approx(1.0, abs=1e-9)


def test_scripted_point_mass_and_zero_log_prob():
    m = ScriptedModel.from_texts({"hi": [("there friend <eos>", [1, 1, 1])]})
    p = m.vocab.encode("hi")
    dist = m.next_token_dist(p)
    assert dist[m.vocab.index["there"]] == 1.0 and dist.sum() == 1.0
    assert sample_next(m, p, StreamKey(123, 0, 0)) == m.vocab.index["there"]
    assert sequence_log_prob(m, p, m.vocab.encode("there friend <eos>")) == 0.0


def test_scripted_residual_mass_goes_to_unk():
    m = ScriptedModel.from_texts({"q": [("x <eos>", [0.3, 1]), ("y <eos>", [0.5, 1])]})
    d = m.next_token_dist(m.vocab.encode("q"))
    assert d[m.vocab.unk_id] == pytest.approx(0.2)
    # off-script context terminates
    assert m.next_token_dist(m.vocab.encode("q") + [m.vocab.unk_id])[m.vocab.eos_id] == 1.0


def test_scripted_validation():
    with pytest.raises(ModelError, match="end with <eos>"):
        ScriptedModel.from_texts({"q": [("x y", [1, 1])]})
    with pytest.raises(ModelError, match=r"\(0, 1\]"):
        ScriptedModel.from_texts({"q": [("x <eos>", [0, 1])]})
    with pytest.raises(ModelError, match="exceed 1"):
        ScriptedModel.from_texts({"q": [("x <eos>", [0.7, 1]), ("y <eos>", [0.7, 1])]})


def test_sampling_is_deterministic(reference_model):
    p = reference_model.vocab.encode("how do i fix my bike ?")
    a = generate(reference_model, p, range(20), seed=11, max_new_tokens=64)
    b = generate(reference_model, p, range(20), seed=11, max_new_tokens=64)
    assert [s.generated for s in a] == [s.generated for s in b]
    c = generate(reference_model, p, range(20), seed=12, max_new_tokens=64)
    assert [s.generated for s in a] != [s.generated for s in c]


def test_batched_and_scalar_paths_agree(reference_model):
    p = reference_model.vocab.encode("what is the best way to paint the fence ?")
    batch = generate(reference_model, p, range(30), seed=5, max_new_tokens=40)
    for s in batch:
        one = generate_one(reference_model, p, s.index, 5, 40)
        assert one.generated == s.generated
        assert one.cum_log_prob == s.cum_log_prob


def test_batch_composition_does_not_change_streams(reference_model):
    p = reference_model.vocab.encode("i want to grow a cake ?")
    full = generate(reference_model, p, range(10), seed=9, max_new_tokens=30)
    odd = generate(reference_model, p, range(1, 10, 2), seed=9, max_new_tokens=30)
    assert [s.generated for s in odd] == [full[i].generated for i in range(1, 10, 2)]


def test_sample_frequencies_match_distribution(tiny_model):
    ctx = tiny_model.vocab.encode("a")
    dist = tiny_model.next_token_dist(ctx)
    n = 100_000
    counts = np.zeros(len(dist))
    for i in range(n):
        counts[sample_next(tiny_model, ctx, StreamKey(42, i, 0))] += 1
    se = np.sqrt(dist * (1 - dist) / n)
    assert np.all(np.abs(counts / n - dist) <= 3 * se + 1e-12)


def test_generation_terminates_and_statuses(reference_model):
    p = reference_model.vocab.encode("can you help me build the fence ?")
    for s in generate(reference_model, p, range(50), seed=1, max_new_tokens=12):
        assert s.status == COMPLETED
        assert s.generated[-1] == reference_model.vocab.eos_id or s.length == 12


def test_cum_log_prob_matches_rescoring(reference_model, reference_prompts):
    vocab = reference_model.vocab
    seqs = []
    for k, entry in enumerate(reference_prompts[:10]):
        seqs += generate(reference_model, vocab.encode(entry["prompt"]), range(10), seed=k, max_new_tokens=64)
    assert len(seqs) == 100
    for s in seqs:
        assert sequence_log_prob(reference_model, s.prompt, s.generated) == pytest.approx(s.cum_log_prob, abs=1e-9)


def test_rejected_sequence_is_never_extended(tiny_model):
    (s,) = new_sequences(tiny_model, [2], [0], 10)
    s.reject()
    with pytest.raises(ModelError):
        extend(tiny_model, [s], 0)


def test_prefix_keeps_running_log_prob(reference_model):
    p = reference_model.vocab.encode("explain how to clean the kitchen ?")
    (s,) = generate(reference_model, p, [3], seed=4, max_new_tokens=64)
    pre = s.prefix(5)
    assert pre.generated == s.generated[:5]
    assert pre.cum_log_prob == pytest.approx(sum(s.step_log_probs[:5]), abs=0)
    assert s.prefix(10_000).status == COMPLETED


def test_model_round_trip(tmp_path, reference_model):
    path = tmp_path / "m.json"
    save_model(reference_model, path)
    loaded = load_model(path)
    assert isinstance(loaded, NGramModel)
    assert loaded.vocab == reference_model.vocab
    rng = np.random.default_rng(0)
    for _ in range(100):
        ctx = rng.integers(0, len(loaded.vocab), size=rng.integers(0, 5)).tolist()
        np.testing.assert_array_equal(loaded.next_token_dist(ctx), reference_model.next_token_dist(ctx))
    path2 = tmp_path / "m2.json"
    save_model(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_scripted_fixture_round_trip(tmp_path, worked_example):
    model = worked_example[0]
    again = ScriptedModel.from_dict(model.to_dict())
    assert again.scripts == model.scripts and again.vocab == model.vocab
