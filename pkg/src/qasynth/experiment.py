"""Comparison-matrix execution and report rendering.

The paper-faithful matrix is 12 runs (context source x N x prompt mode)
plus two baselines: a model fine-tuned on human-authored pairs and the
plain un-fine-tuned model. Predictions are consumed from files (one
JSONL per run, ``{"question_id", "answer"}``), joined to the gold
evaluation set by question id, and scored with corpus BLEU and the
greedy-matching embedding score. Rows keep the published table order:
baselines first, then (N, prompt-mode) groups each listing news, wiki,
JSQuAD.
"""

from __future__ import annotations

import csv
import io
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

from .corpus import GoldQA, SOURCES
from .errors import IntegrityError, MetricError
from .gateway import ChatGateway, GenerationParams
from .jsonio import canonical_dumps, iter_jsonl
from .metrics import EmbeddingProvider, corpus_bert_score, corpus_bleu
from .prompts import ONE_SHOT, ZERO_SHOT, build_answer_prompt

logger = logging.getLogger(__name__)

BASELINE_HUMAN = "Human"
BASELINE_PLAIN = "GPT"

# row order of the published results table
SOURCE_ORDER = ("news", "wiki", "jsquad")
GROUP_ORDER = ((1, ZERO_SHOT), (1, ONE_SHOT), (3, ZERO_SHOT), (3, ONE_SHOT))

_SOURCE_DISPLAY = {"news": "news", "wiki": "wiki", "jsquad": "JSQuAD"}
_MODE_DISPLAY = {ZERO_SHOT: "zero", ONE_SHOT: "one"}


@dataclass(frozen=True)
class RunConfig:
    label: str
    context_source: str | None = None
    n: int | None = None
    prompt_mode: str | None = None
    seed: int = 0
    generation: GenerationParams | None = None

    def __post_init__(self):
        if not self.label:
            raise IntegrityError("run label must be non-empty")
        if self.context_source is not None and self.context_source not in SOURCES:
            raise IntegrityError(f"unknown context_source {self.context_source!r}")
        if self.prompt_mode is not None and self.prompt_mode not in (ZERO_SHOT, ONE_SHOT):
            raise IntegrityError(f"unknown prompt_mode {self.prompt_mode!r}")
        if self.n is not None and self.n < 1:
            raise IntegrityError("n must be >= 1")

    @property
    def is_baseline(self) -> bool:
        return self.context_source is None


@dataclass(frozen=True)
class MetricReport:
    run: str
    context_source: str | None
    n: int | None
    prompt_mode: str | None
    bert_score: float
    bleu: float
    n_eval_items: int
    metric_settings: dict

    def __post_init__(self):
        if self.n_eval_items <= 0:
            raise MetricError("n_eval_items must be > 0")
        if not self.metric_settings:
            raise MetricError("metric_settings must be present")

    def to_json(self) -> dict:
        return {
            "run": self.run,
            "context_source": self.context_source,
            "n": self.n,
            "prompt_mode": self.prompt_mode,
            "bert_score": self.bert_score,
            "bleu": self.bleu,
            "n_eval_items": self.n_eval_items,
            "metric_settings": dict(self.metric_settings),
        }


def report_from_json(obj: dict) -> MetricReport:
    return MetricReport(
        run=obj["run"],
        context_source=obj["context_source"],
        n=obj["n"],
        prompt_mode=obj["prompt_mode"],
        bert_score=obj["bert_score"],
        bleu=obj["bleu"],
        n_eval_items=obj["n_eval_items"],
        metric_settings=obj["metric_settings"],
    )


@dataclass(frozen=True)
class SkippedRun:
    label: str
    reason: str


@dataclass(frozen=True)
class MatrixResult:
    reports: tuple[MetricReport, ...]
    skipped: tuple[SkippedRun, ...]


def run_label(source: str, n: int, mode: str) -> str:
    return f"{source}_n{n}_{_MODE_DISPLAY[mode]}"


def paper_matrix(seed: int = 0, generation: GenerationParams | None = None) -> list[RunConfig]:
    """The 14 table rows: two baselines plus the 3x2x2 product."""
    matrix = [
        RunConfig(label=BASELINE_HUMAN, seed=seed, generation=generation),
        RunConfig(label=BASELINE_PLAIN, seed=seed, generation=generation),
    ]
    for n, mode in GROUP_ORDER:
        for source in SOURCE_ORDER:
            matrix.append(
                RunConfig(
                    label=run_label(source, n, mode),
                    context_source=source,
                    n=n,
                    prompt_mode=mode,
                    seed=seed,
                    generation=generation,
                )
            )
    return matrix


def read_predictions(path: Path | str) -> dict[str, str]:
    """question_id -> predicted answer; duplicate ids are an error."""
    predictions: dict[str, str] = {}
    for lineno, obj in iter_jsonl(path):
        try:
            question_id = obj["question_id"]
            answer = obj["answer"]
        except (KeyError, TypeError) as exc:
            raise IntegrityError(f"{path}: line {lineno}: missing field {exc}") from exc
        if question_id in predictions:
            raise IntegrityError(f"{path}: line {lineno}: duplicate question_id {question_id!r}")
        predictions[question_id] = answer
    return predictions


def evaluate_predictions(
    label: str,
    predictions: dict[str, str],
    eval_set: Sequence[GoldQA],
    provider: EmbeddingProvider,
    tokenizer: str = "char",
    smoothing: str = "none",
    smooth_value: float | None = None,
    run: RunConfig | None = None,
) -> MetricReport:
    """Score one run's predictions against the gold set, joined by question id."""
    gold_ids = [g.question_id for g in eval_set]
    if len(set(gold_ids)) != len(gold_ids):
        raise IntegrityError("evaluation set contains duplicate question ids")
    hyps: list[str] = []
    refs: list[str] = []
    matched: set[str] = set()
    for gold in eval_set:
        if gold.question_id in predictions:
            matched.add(gold.question_id)
            hyps.append(predictions[gold.question_id])
            refs.append(gold.answers[0])
    unmatched_gold = len(eval_set) - len(hyps)
    unmatched_predictions = sorted(set(predictions) - matched)
    if unmatched_gold:
        logger.warning("%s: %d gold items have no prediction", label, unmatched_gold)
    if unmatched_predictions:
        logger.warning(
            "%s: %d predictions match no gold question id (e.g. %s)",
            label,
            len(unmatched_predictions),
            unmatched_predictions[0],
        )
    if not hyps:
        raise MetricError(f"{label}: no predictions matched the evaluation set")

    bleu = corpus_bleu(hyps, refs, tokenizer=tokenizer, smoothing=smoothing, smooth_value=smooth_value)
    bert_mean_f1, _ = corpus_bert_score(provider, hyps, refs)
    return MetricReport(
        run=label,
        context_source=run.context_source if run else None,
        n=run.n if run else None,
        prompt_mode=run.prompt_mode if run else None,
        bert_score=bert_mean_f1,
        bleu=bleu.score,
        n_eval_items=len(hyps),
        metric_settings={
            "tokenizer": tokenizer,
            "smoothing": smoothing,
            "smooth_value": smooth_value,
            "embedding_provider": provider.provider_id,
            "unmatched_gold": unmatched_gold,
            "unmatched_predictions": len(unmatched_predictions),
        },
    )


def run_matrix(
    matrix: Sequence[RunConfig],
    eval_set: Sequence[GoldQA],
    predictions_dir: Path | str,
    provider: EmbeddingProvider,
    tokenizer: str = "char",
    smoothing: str = "none",
    smooth_value: float | None = None,
) -> MatrixResult:
    """Evaluate every run with a predictions file; missing files become skips."""
    predictions_dir = Path(predictions_dir)
    reports: list[MetricReport] = []
    skipped: list[SkippedRun] = []
    for run in matrix:
        path = predictions_dir / f"{run.label}.jsonl"
        if not path.exists():
            skipped.append(SkippedRun(run.label, f"predictions file not found: {path}"))
            continue
        try:
            report = evaluate_predictions(
                run.label,
                read_predictions(path),
                eval_set,
                provider,
                tokenizer=tokenizer,
                smoothing=smoothing,
                smooth_value=smooth_value,
                run=run,
            )
        except (MetricError, IntegrityError) as exc:
            skipped.append(SkippedRun(run.label, str(exc)))
            continue
        reports.append(report)
    return MatrixResult(tuple(reports), tuple(skipped))


def generate_predictions(
    eval_set: Sequence[GoldQA],
    contexts,
    gateway: ChatGateway,
    params: GenerationParams,
    out_path: Path | str,
) -> int:
    """Produce a predictions file by prompting the (un-fine-tuned) model."""
    index = contexts if isinstance(contexts, dict) else {d.id: d for d in contexts}
    count = 0
    with open(out_path, "w", encoding="utf-8") as handle:
        for gold in eval_set:
            doc = index.get(gold.context_id)
            if doc is None:
                raise IntegrityError(f"gold item references unknown context {gold.context_id!r}")
            prompt = build_answer_prompt(gold.question, doc.text)
            result = gateway.chat_complete(prompt, params)
            handle.write(
                canonical_dumps({"question_id": gold.question_id, "answer": result.text}) + "\n"
            )
            count += 1
    return count


# ---------------------------------------------------------------------------
# Rendering


def _row_cells(report: MetricReport) -> tuple[str, str, str]:
    if report.context_source is None:
        return report.run, "-", "-"
    return (
        _SOURCE_DISPLAY[report.context_source],
        str(report.n),
        _MODE_DISPLAY[report.prompt_mode],
    )


def render_report(
    reports: Sequence[MetricReport],
    fmt: str,
    skipped: Sequence[SkippedRun] = (),
) -> str:
    """Render reports as markdown, csv, or json (lossless)."""
    if not reports:
        raise MetricError("reports must be non-empty")
    if fmt == "json":
        return canonical_dumps(
            {
                "reports": [r.to_json() for r in reports],
                "skipped": [{"label": s.label, "reason": s.reason} for s in skipped],
            }
        )
    if fmt == "markdown":
        lines = [
            "| context | N | prompt | BERTScore | BLEU |",
            "| --- | --- | --- | --- | --- |",
        ]
        for report in reports:
            context, n, mode = _row_cells(report)
            lines.append(f"| {context} | {n} | {mode} | {report.bert_score} | {report.bleu} |")
        for skip in skipped:
            lines.append(f"| {skip.label} | | | skipped: {skip.reason} | |")
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(
            [
                "context",
                "N",
                "prompt",
                "bert_score",
                "bleu",
                "n_eval_items",
                "run",
                "tokenizer",
                "smoothing",
                "embedding_provider",
            ]
        )
        for report in reports:
            context, n, mode = _row_cells(report)
            writer.writerow(
                [
                    context,
                    n,
                    mode,
                    repr(report.bert_score),
                    repr(report.bleu),
                    report.n_eval_items,
                    report.run,
                    report.metric_settings.get("tokenizer"),
                    report.metric_settings.get("smoothing"),
                    report.metric_settings.get("embedding_provider"),
                ]
            )
        return buffer.getvalue()
    raise MetricError(f"unknown report format {fmt!r}, expected markdown, csv, or json")
