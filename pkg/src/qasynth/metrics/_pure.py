"""Reference implementations of the metric inner loops.

These are the fallback when the compiled extension is unavailable; the
compiled versions in ``_kernels.pyx`` must match them exactly (the test
suite cross-checks). Keep both in sync.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Sequence

import numpy as np


def clipped_ngram_stats(
    hyp_tokens: Sequence[str],
    ref_tokens: Sequence[str],
    max_order: int,
) -> tuple[list[int], list[int]]:
    """Per-order clipped n-gram matches and hypothesis n-gram totals.

    correct[n-1] counts hypothesis n-grams (with multiplicity) that also
    occur in the reference, clipped at the reference multiplicity.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    correct = [0] * max_order
    total = [0] * max_order
    for n in range(1, max_order + 1):
        hyp_counts = Counter(
            tuple(hyp_tokens[i : i + n]) for i in range(len(hyp_tokens) - n + 1)
        )
        ref_counts = Counter(
            tuple(ref_tokens[i : i + n]) for i in range(len(ref_tokens) - n + 1)
        )
        total[n - 1] = max(0, len(hyp_tokens) - n + 1)
        correct[n - 1] = sum(
            min(count, ref_counts[gram]) for gram, count in hyp_counts.items()
        )
    return correct, total


def greedy_match_scores(ref_emb: np.ndarray, hyp_emb: np.ndarray) -> tuple[float, float]:
    """Greedy-matching (precision, recall) over two token embedding matrices.

    Rows are tokens. recall averages, over reference tokens, the best
    similarity to any hypothesis token; precision is the transpose view.
    """
    ref = np.asarray(ref_emb, dtype=np.float64)
    hyp = np.asarray(hyp_emb, dtype=np.float64)
    if ref.ndim != 2 or hyp.ndim != 2:
        raise ValueError("embeddings must be 2-dimensional (tokens x dims)")
    if ref.shape[0] == 0 or hyp.shape[0] == 0:
        raise ValueError("token embedding lists must be non-empty")
    if ref.shape[1] != hyp.shape[1]:
        raise ValueError(
            f"embedding dimension mismatch: ref has {ref.shape[1]}, hyp has {hyp.shape[1]}"
        )
    sim = ref @ hyp.T
    recall = float(sim.max(axis=1).mean())
    precision = float(sim.max(axis=0).mean())
    return precision, recall
