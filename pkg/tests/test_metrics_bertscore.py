import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qasynth.errors import MetricError
from qasynth.metrics import (
    EmbeddingProvider,
    HashEmbeddingProvider,
    HttpEmbeddingProvider,
    bert_score,
    corpus_bert_score,
    score_pair,
)

from reference_impls import bert_oracle


def _random_unit_vectors(rng, count, dim):
    vectors = []
    while len(vectors) < count:
        v = [rng.gauss(0.0, 1.0) for _ in range(dim)]
        norm = math.sqrt(sum(x * x for x in v))
        if norm < 1e-9:
            continue
        vectors.append([x / norm for x in v])
    return vectors


def _as_emb(vectors, prefix):
    return [(f"{prefix}{i}", np.array(v)) for i, v in enumerate(vectors)]


def test_oracle_equivalence_100_random_sets():
    rng = random.Random(0xBE27)
    for case in range(100):
        dim = rng.randint(2, 8)
        ref = _random_unit_vectors(rng, rng.randint(1, 6), dim)
        hyp = _random_unit_vectors(rng, rng.randint(1, 6), dim)
        want_p, want_r, want_f1 = bert_oracle(ref, hyp)
        got = bert_score(_as_emb(hyp, "h"), _as_emb(ref, "r"))
        assert got.precision == pytest.approx(want_p, abs=1e-12), f"case {case}"
        assert got.recall == pytest.approx(want_r, abs=1e-12), f"case {case}"
        assert got.f1 == pytest.approx(want_f1, abs=1e-12), f"case {case}"
        # swap symmetry on every case
        swapped = bert_score(_as_emb(ref, "r"), _as_emb(hyp, "h"))
        assert swapped.precision == pytest.approx(got.recall, abs=1e-12)
        assert swapped.recall == pytest.approx(got.precision, abs=1e-12)


def test_frozen_two_dim_case():
    # frozen from the exhaustive oracle
    def unit(x, y):
        n = math.hypot(x, y)
        return np.array([x / n, y / n])

    ref = [("r0", unit(1, 0)), ("r1", unit(1, 1)), ("r2", unit(0, 1))]
    hyp = [("h0", unit(1, 0.2)), ("h1", unit(-1, 0.5))]
    got = bert_score(hyp, ref)
    assert got.precision == pytest.approx(0.713897135595439, abs=1e-12)
    assert got.recall == pytest.approx(0.7532815218429071, abs=1e-12)
    assert got.f1 == pytest.approx(0.733060718971401, abs=1e-12)


def test_identical_sides_score_one():
    provider = HashEmbeddingProvider()
    triple = score_pair(provider, "同じ文章です", "同じ文章です")
    assert triple.precision == pytest.approx(1.0)
    assert triple.recall == pytest.approx(1.0)
    assert triple.f1 == pytest.approx(1.0)


@settings(max_examples=30)
@given(st.data())
def test_token_order_invariance(data):
    rng = random.Random(data.draw(st.integers(min_value=0, max_value=2**31)))
    dim = rng.randint(2, 5)
    ref = _as_emb(_random_unit_vectors(rng, rng.randint(1, 5), dim), "r")
    hyp = _as_emb(_random_unit_vectors(rng, rng.randint(1, 5), dim), "h")
    base = bert_score(hyp, ref)
    rng.shuffle(ref)
    rng.shuffle(hyp)
    shuffled = bert_score(hyp, ref)
    assert shuffled.precision == pytest.approx(base.precision, abs=1e-12)
    assert shuffled.recall == pytest.approx(base.recall, abs=1e-12)


def test_f1_zero_when_precision_plus_recall_zero():
    ref = [("r", np.array([1.0, 0.0]))]
    hyp = [("h", np.array([-1.0, 0.0]))]
    got = bert_score(hyp, ref)
    assert got.precision == -1.0 and got.recall == -1.0
    assert got.f1 == 0.0  # negative similarity sums short-circuit to 0


def test_validation_errors():
    vec = [("t", np.array([1.0, 0.0]))]
    with pytest.raises(MetricError):
        bert_score([], vec)
    with pytest.raises(MetricError):
        bert_score(vec, [])
    with pytest.raises(MetricError):
        bert_score(vec, [("t", np.array([1.0, 0.0, 0.0]))])


def test_corpus_mean_is_arithmetic_over_pairs():
    provider = HashEmbeddingProvider()
    hyps = ["東京", "完全一致"]
    refs = ["大阪", "完全一致"]
    mean_f1, triples = corpus_bert_score(provider, hyps, refs)
    assert len(triples) == 2
    assert mean_f1 == pytest.approx((triples[0].f1 + triples[1].f1) / 2)
    assert triples[1].f1 == pytest.approx(1.0)
    with pytest.raises(MetricError):
        corpus_bert_score(provider, ["a"], ["a", "b"])
    with pytest.raises(MetricError):
        corpus_bert_score(provider, [], [])


# -- hash provider -----------------------------------------------------------


def test_hash_provider_vectors_are_unit_norm_and_stable():
    provider = HashEmbeddingProvider(dimension=8)
    emb1 = provider.embed("漢字とkanaとlatin")
    emb2 = provider.embed("漢字とkanaとlatin")
    assert [t for t, _ in emb1] == [ch for ch in "漢字とkanaとlatin"]
    for (_, v1), (_, v2) in zip(emb1, emb2):
        assert np.linalg.norm(v1) == pytest.approx(1.0, abs=1e-9)
        assert np.array_equal(v1, v2)


def test_hash_provider_skips_whitespace_and_rejects_empty():
    provider = HashEmbeddingProvider()
    tokens = [t for t, _ in provider.embed("a b\tc\n")]
    assert tokens == ["a", "b", "c"]
    with pytest.raises(MetricError):
        provider.embed("   ")
    with pytest.raises(MetricError):
        HashEmbeddingProvider(dimension=0)


def test_hash_provider_conforms_to_protocol():
    assert isinstance(HashEmbeddingProvider(), EmbeddingProvider)
    assert HashEmbeddingProvider(dimension=16).provider_id == "hash-v1-d16"


# -- http provider -----------------------------------------------------------


class _FakeResponse:
    def __init__(self, status_code, payload):
        self.status_code = status_code
        self._payload = payload

    def json(self):
        return self._payload


def _patched_provider(monkeypatch, payload, status=200):
    provider = HttpEmbeddingProvider("http://emb.test/v1", model_id="bert-ja", layer=11)
    monkeypatch.setattr(
        provider, "_client", type("C", (), {"post": lambda self, url, json: _FakeResponse(status, payload)})()
    )
    return provider


def test_http_provider_identity_and_parsing(monkeypatch):
    payload = {"tokens": ["東", "京"], "vectors": [[1.0, 0.0], [0.0, 1.0]]}
    provider = _patched_provider(monkeypatch, payload)
    assert provider.provider_id == "bert-ja@layer11"
    emb = provider.embed("東京")
    assert [t for t, _ in emb] == ["東", "京"]
    assert np.array_equal(emb[0][1], np.array([1.0, 0.0]))


def test_http_provider_rejects_non_unit_vectors(monkeypatch):
    payload = {"tokens": ["x"], "vectors": [[0.5, 0.5]]}
    provider = _patched_provider(monkeypatch, payload)
    with pytest.raises(MetricError) as err:
        provider.embed("x")
    assert "norm" in str(err.value)


def test_http_provider_rejects_malformed_payload(monkeypatch):
    provider = _patched_provider(monkeypatch, {"tokens": ["a", "b"], "vectors": [[1.0]]})
    with pytest.raises(MetricError):
        provider.embed("ab")
    provider = _patched_provider(monkeypatch, {}, status=500)
    with pytest.raises(MetricError) as err:
        provider.embed("ab")
    assert "500" in str(err.value)
