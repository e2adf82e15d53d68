"""Corpus BLEU with clipped modified n-gram precisions (orders 1..4).

Matches the de-facto reference library semantics: precisions accumulate
clipped counts over the whole corpus, brevity penalty is exp(1 -
ref_len/hyp_len) when the hypothesis side is shorter, and with smoothing
"none" any zero precision zeroes the score. "floor" smoothing replaces
zero-match precisions with smooth_value/total (default 0.0, i.e. a no-op
unless a value is given). Precisions are reported as fractions in [0,1].

Japanese has no whitespace segmentation, so the default tokenizer is
character-level (whitespace characters dropped); a plain whitespace
tokenizer is selectable for space-delimited text.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

from ..errors import MetricError
from . import kernels

MAX_ORDER = 4

TOKENIZERS: dict[str, Callable[[str], list[str]]] = {
    "char": lambda text: [ch for ch in text if not ch.isspace()],
    "space": str.split,
}

SMOOTHING_METHODS = ("none", "floor")


@dataclass(frozen=True)
class BleuScore:
    score: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    hyp_len: int
    ref_len: int

    def __post_init__(self):
        if not 0.0 <= self.score <= 100.0:
            raise MetricError(f"BLEU score {self.score} outside [0, 100]")
        if not 0.0 < self.brevity_penalty <= 1.0:
            raise MetricError(f"brevity penalty {self.brevity_penalty} outside (0, 1]")
        if any(not 0.0 <= p <= 1.0 for p in self.precisions):
            raise MetricError(f"precisions {self.precisions} outside [0, 1]")


def _log_or_neg_inf(value: float) -> float:
    return math.log(value) if value > 0.0 else -math.inf


def compute_bleu(
    correct: Sequence[int],
    total: Sequence[int],
    hyp_len: int,
    ref_len: int,
    smoothing: str = "none",
    smooth_value: float | None = None,
) -> BleuScore:
    """Assemble a BleuScore from accumulated corpus statistics."""
    if smoothing not in SMOOTHING_METHODS:
        raise MetricError(f"unknown smoothing {smoothing!r}, expected one of {SMOOTHING_METHODS}")
    if smooth_value is None:
        smooth_value = 0.0
    if smooth_value < 0:
        raise MetricError("smooth_value must be >= 0")
    if len(correct) != MAX_ORDER or len(total) != MAX_ORDER:
        raise MetricError(f"correct and total must each have {MAX_ORDER} entries")
    if any(c < 0 or t < 0 or c > t for c, t in zip(correct, total)):
        raise MetricError("clipped counts must satisfy 0 <= correct[n] <= total[n]")

    precisions = []
    for n in range(MAX_ORDER):
        if total[n] == 0:
            # no hypothesis n-grams of this order exist; smoothing has
            # nothing to divide by
            precisions.append(0.0)
        elif correct[n] == 0 and smoothing == "floor":
            precisions.append(min(1.0, smooth_value / total[n]))
        else:
            precisions.append(correct[n] / total[n])

    if hyp_len == 0:
        # empty hypothesis corpus scores 0 through the precisions; the
        # brevity penalty is left at its no-penalty value to stay in (0,1]
        brevity_penalty = 1.0
    elif hyp_len < ref_len:
        brevity_penalty = math.exp(1.0 - ref_len / hyp_len)
    else:
        brevity_penalty = 1.0

    mean_log_precision = sum(_log_or_neg_inf(p) for p in precisions) / MAX_ORDER
    score = 100.0 * brevity_penalty * math.exp(mean_log_precision)
    return BleuScore(
        score=score,
        precisions=tuple(precisions),
        brevity_penalty=brevity_penalty,
        hyp_len=hyp_len,
        ref_len=ref_len,
    )


def corpus_bleu(
    hypotheses: Sequence[str],
    references: Sequence[str],
    tokenizer: str = "char",
    smoothing: str = "none",
    smooth_value: float | None = None,
) -> BleuScore:
    """Corpus-level BLEU of hypotheses against one reference each."""
    if len(hypotheses) != len(references):
        raise MetricError(
            f"got {len(hypotheses)} hypotheses but {len(references)} references"
        )
    if not hypotheses:
        raise MetricError("corpus must contain at least one pair")
    if tokenizer not in TOKENIZERS:
        raise MetricError(f"unknown tokenizer {tokenizer!r}, expected one of {tuple(TOKENIZERS)}")
    tokenize = TOKENIZERS[tokenizer]

    correct = [0] * MAX_ORDER
    total = [0] * MAX_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_tokens = tokenize(hyp)
        ref_tokens = tokenize(ref)
        hyp_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        pair_correct, pair_total = kernels.clipped_ngram_stats(hyp_tokens, ref_tokens, MAX_ORDER)
        for n in range(MAX_ORDER):
            correct[n] += pair_correct[n]
            total[n] += pair_total[n]

    return compute_bleu(correct, total, hyp_len, ref_len, smoothing, smooth_value)
