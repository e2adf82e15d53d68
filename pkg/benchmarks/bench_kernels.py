"""Timing comparison for the metric inner loops: compiled vs pure Python.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

The compiled numbers require the extension to have built; the pure
numbers are always available. Workloads mirror real evaluation sizes:
character-tokenized Japanese answers for BLEU, short token-embedding
matrices for BERTScore matching.
"""

import random
import statistics
import time

import numpy as np

from qasynth.metrics import _pure
from qasynth.metrics.kernels import KERNEL_IMPL, _compiled


def _time(fn, repeats=5):
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return min(samples), statistics.median(samples)


def _bleu_workload(n_pairs=2000, seed=0):
    rng = random.Random(seed)
    vocab = [chr(0x3042 + i) for i in range(60)]
    pairs = []
    for _ in range(n_pairs):
        hyp = rng.choices(vocab, k=rng.randint(4, 30))
        ref = rng.choices(vocab, k=rng.randint(4, 30))
        pairs.append((hyp, ref))
    return pairs


def _bert_workload(n_pairs=400, dim=768, seed=0):
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_pairs):
        ref = rng.normal(size=(int(rng.integers(4, 40)), dim))
        hyp = rng.normal(size=(int(rng.integers(4, 40)), dim))
        ref /= np.linalg.norm(ref, axis=1, keepdims=True)
        hyp /= np.linalg.norm(hyp, axis=1, keepdims=True)
        pairs.append((np.ascontiguousarray(ref), np.ascontiguousarray(hyp)))
    return pairs


def _report(label, pure_best, compiled_best):
    if compiled_best is None:
        print(f"{label:<28} pure {pure_best * 1e3:8.2f} ms   compiled unavailable")
        return
    speedup = pure_best / compiled_best if compiled_best else float("inf")
    print(
        f"{label:<28} pure {pure_best * 1e3:8.2f} ms   "
        f"compiled {compiled_best * 1e3:8.2f} ms   x{speedup:.1f}"
    )


def main():
    print(f"active kernel implementation: {KERNEL_IMPL}")

    bleu_pairs = _bleu_workload()

    def bleu_pure():
        for hyp, ref in bleu_pairs:
            _pure.clipped_ngram_stats(hyp, ref, 4)

    pure_best, _ = _time(bleu_pure)
    compiled_best = None
    if _compiled is not None:
        def bleu_compiled():
            for hyp, ref in bleu_pairs:
                _compiled.clipped_ngram_stats(hyp, ref, 4)

        compiled_best, _ = _time(bleu_compiled)
    _report(f"clipped_ngram_stats ({len(bleu_pairs)})", pure_best, compiled_best)

    bert_pairs = _bert_workload()

    def bert_pure():
        for ref, hyp in bert_pairs:
            _pure.greedy_match_scores(ref, hyp)

    pure_best, _ = _time(bert_pure)
    compiled_best = None
    if _compiled is not None:
        def bert_compiled():
            for ref, hyp in bert_pairs:
                _compiled.greedy_match_scores(ref, hyp)

        compiled_best, _ = _time(bert_compiled)
    _report(f"greedy_match_scores ({len(bert_pairs)})", pure_best, compiled_best)


if __name__ == "__main__":
    main()
