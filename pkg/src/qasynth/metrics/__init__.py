"""Automatic and human evaluation metrics for QA outputs."""

from __future__ import annotations

from collections.abc import Sequence

from ..errors import MetricError
from .bertscore import (
    BertScoreTriple,
    EmbeddingProvider,
    HashEmbeddingProvider,
    HttpEmbeddingProvider,
    bert_score,
    corpus_bert_score,
    score_pair,
)
from .bleu import MAX_ORDER, SMOOTHING_METHODS, TOKENIZERS, BleuScore, compute_bleu, corpus_bleu
from .kernels import KERNEL_IMPL

__all__ = [
    "BertScoreTriple",
    "BleuScore",
    "EmbeddingProvider",
    "HashEmbeddingProvider",
    "HttpEmbeddingProvider",
    "KERNEL_IMPL",
    "MAX_ORDER",
    "SMOOTHING_METHODS",
    "TOKENIZERS",
    "accuracy",
    "accuracy_from_counts",
    "bert_score",
    "compute_bleu",
    "corpus_bert_score",
    "corpus_bleu",
    "score_pair",
]


def accuracy_from_counts(correct: int, total: int) -> float:
    """Percentage of correct items, reported to one decimal place.

    Rounded half-to-even on the exact rational 1000*correct/total, in
    integer arithmetic, so results are platform-exact and
    accuracy(correct) + accuracy(total - correct) == 100 always holds.
    """
    if total < 1:
        raise MetricError("total must be >= 1")
    if not 0 <= correct <= total:
        raise MetricError(f"correct={correct} outside [0, {total}]")
    tenths, remainder = divmod(1000 * correct, total)
    if 2 * remainder > total or (2 * remainder == total and tenths % 2 == 1):
        tenths += 1
    return tenths / 10.0


def accuracy(verdicts: Sequence[bool]) -> float:
    """Accuracy over per-item correctness verdicts, one decimal place."""
    if not verdicts:
        raise MetricError("verdicts must be non-empty")
    return accuracy_from_counts(sum(1 for v in verdicts if v), len(verdicts))
