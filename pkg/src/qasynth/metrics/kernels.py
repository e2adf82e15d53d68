"""Selects the metric inner-loop implementation at import time.

The compiled extension is optional; when it failed to build (or
``QASYNTH_PURE_KERNELS=1`` is set) the pure implementations are used.
``clipped_ngram_stats`` additionally falls back per call when a pair
exceeds the compiled kernel's packed-key vocabulary limit.
"""

from __future__ import annotations

import os
from collections.abc import Sequence

import numpy as np

from . import _pure

_FORCE_PURE = os.environ.get("QASYNTH_PURE_KERNELS", "").strip() in ("1", "true", "yes")

_compiled = None
if not _FORCE_PURE:
    try:
        from . import _kernels as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None

KERNEL_IMPL = "compiled" if _compiled is not None else "pure"


def clipped_ngram_stats(
    hyp_tokens: Sequence[str],
    ref_tokens: Sequence[str],
    max_order: int = 4,
) -> tuple[list[int], list[int]]:
    if _compiled is not None and max_order <= 4:
        try:
            return _compiled.clipped_ngram_stats(list(hyp_tokens), list(ref_tokens), max_order)
        except ValueError as exc:
            if "vocabulary" not in str(exc):
                raise
    return _pure.clipped_ngram_stats(hyp_tokens, ref_tokens, max_order)


def greedy_match_scores(ref_emb: np.ndarray, hyp_emb: np.ndarray) -> tuple[float, float]:
    if _compiled is not None:
        return _compiled.greedy_match_scores(ref_emb, hyp_emb)
    return _pure.greedy_match_scores(ref_emb, hyp_emb)
