"""Greedy-matching token-similarity score over contextual embeddings.

The embedding model lives behind ``EmbeddingProvider``; scoring itself is
pure linear algebra. Given reference tokens r_i and hypothesis tokens
h_j with unit-normalized vectors, S[i][j] = dot(r_i, h_j); recall is the
mean over reference tokens of the row max, precision the mean over
hypothesis tokens of the column max. No idf weighting, no baseline
rescaling. Dataset-level aggregation is the arithmetic mean of per-pair
F1.
"""

from __future__ import annotations

import hashlib
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from ..errors import MetricError
from . import kernels

TokenEmbeddings = Sequence[tuple[str, np.ndarray]]


@dataclass(frozen=True)
class BertScoreTriple:
    precision: float
    recall: float
    f1: float


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Turns text into per-token unit-normalized vectors."""

    provider_id: str

    def embed(self, text: str) -> list[tuple[str, np.ndarray]]: ...


def _matrix(emb: TokenEmbeddings, side: str) -> np.ndarray:
    if len(emb) == 0:
        raise MetricError(f"{side} token embedding list is empty")
    return np.vstack([np.asarray(vec, dtype=np.float64) for _, vec in emb])


def bert_score(hyp_emb: TokenEmbeddings, ref_emb: TokenEmbeddings) -> BertScoreTriple:
    """Score one hypothesis/reference pair from pre-embedded tokens."""
    hyp = _matrix(hyp_emb, "hypothesis")
    ref = _matrix(ref_emb, "reference")
    if hyp.shape[1] != ref.shape[1]:
        raise MetricError(
            f"embedding dimension mismatch: ref has {ref.shape[1]}, hyp has {hyp.shape[1]}"
        )
    try:
        precision, recall = kernels.greedy_match_scores(ref, hyp)
    except ValueError as exc:
        raise MetricError(str(exc)) from exc
    denominator = precision + recall
    f1 = 2.0 * precision * recall / denominator if denominator > 0 else 0.0
    return BertScoreTriple(precision=precision, recall=recall, f1=f1)


def score_pair(provider: EmbeddingProvider, hypothesis: str, reference: str) -> BertScoreTriple:
    return bert_score(provider.embed(hypothesis), provider.embed(reference))


def corpus_bert_score(
    provider: EmbeddingProvider,
    hypotheses: Sequence[str],
    references: Sequence[str],
) -> tuple[float, list[BertScoreTriple]]:
    """Mean per-pair F1 over a corpus, plus the per-pair triples."""
    if len(hypotheses) != len(references):
        raise MetricError(
            f"got {len(hypotheses)} hypotheses but {len(references)} references"
        )
    if not hypotheses:
        raise MetricError("corpus must contain at least one pair")
    triples = [score_pair(provider, h, r) for h, r in zip(hypotheses, references)]
    mean_f1 = sum(t.f1 for t in triples) / len(triples)
    return mean_f1, triples


class HashEmbeddingProvider:
    """Deterministic stand-in provider: vectors derived from token hashes.

    No linguistics, but stable across runs and platforms, which is what
    offline evaluation plumbing and tests need. Equal tokens get equal
    unit vectors, so identical texts score exactly 1.0.
    """

    def __init__(self, dimension: int = 8):
        if dimension < 1:
            raise MetricError("dimension must be >= 1")
        self.dimension = dimension
        self.provider_id = f"hash-v1-d{dimension}"

    def _vector(self, token: str) -> np.ndarray:
        raw = b""
        counter = 0
        while len(raw) < self.dimension:
            raw += hashlib.sha256(f"{counter}:{token}".encode("utf-8")).digest()
            counter += 1
        values = np.frombuffer(raw[: self.dimension], dtype=np.uint8).astype(np.float64)
        values = values - 127.5
        norm = float(np.linalg.norm(values))
        if norm == 0.0:
            values = np.zeros(self.dimension)
            values[0] = 1.0
            return values
        return values / norm

    def embed(self, text: str) -> list[tuple[str, np.ndarray]]:
        tokens = [ch for ch in text if not ch.isspace()]
        if not tokens:
            raise MetricError("cannot embed empty text")
        return [(token, self._vector(token)) for token in tokens]


class HttpEmbeddingProvider:
    """Client for a token-embedding service.

    Request: POST {endpoint} with JSON {"text": ..., "layer": ...}.
    Response: JSON {"tokens": [...], "vectors": [[...], ...]} with one
    unit-normalized vector per token. The pooled layer is part of the
    provider identity so reports never mix settings silently.
    """

    NORM_TOLERANCE = 1e-6

    def __init__(self, endpoint: str, model_id: str, layer: int, timeout: float = 30.0):
        import httpx

        self.endpoint = endpoint
        self.layer = layer
        self.provider_id = f"{model_id}@layer{layer}"
        self._client = httpx.Client(timeout=timeout)

    def embed(self, text: str) -> list[tuple[str, np.ndarray]]:
        if not text:
            raise MetricError("cannot embed empty text")
        response = self._client.post(self.endpoint, json={"text": text, "layer": self.layer})
        if response.status_code != 200:
            raise MetricError(f"embedding service returned HTTP {response.status_code}")
        payload = response.json()
        tokens = payload.get("tokens")
        vectors = payload.get("vectors")
        if not tokens or vectors is None or len(tokens) != len(vectors):
            raise MetricError("embedding service returned a malformed token/vector payload")
        out = []
        for token, vector in zip(tokens, vectors):
            arr = np.asarray(vector, dtype=np.float64)
            norm = float(np.linalg.norm(arr))
            if abs(norm - 1.0) > self.NORM_TOLERANCE:
                raise MetricError(f"vector for token {token!r} has norm {norm}, expected 1")
            out.append((token, arr))
        return out

    def close(self):
        self._client.close()
