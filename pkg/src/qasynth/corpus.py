"""Context corpus ingestion: SQuAD-layout JSON, JSONL corpora, sampling, truncation.

Sources are tagged ``news``, ``wiki``, or ``jsquad``. Every document keeps
both its full text and the truncated form actually fed to the generator
(first 300 Unicode scalar values by default). "Characters" are counted as
Unicode scalar values throughout: byte counts are wrong for Japanese text
and grapheme clustering buys nothing here.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .errors import CorpusError
from .jsonio import iter_jsonl
from .sampling import sample_preserving_order

logger = logging.getLogger(__name__)

SOURCES = ("news", "wiki", "jsquad")
DEFAULT_TRUNCATE_LIMIT = 300


@dataclass(frozen=True)
class ContextDocument:
    """One source passage, with the truncated prefix used for generation."""

    id: str
    source: str
    text: str
    truncated: str
    title: str | None = None

    def __post_init__(self):
        if not self.id:
            raise CorpusError("document id must be non-empty")
        if not self.text:
            raise CorpusError(f"document {self.id} has empty text")
        if self.source not in SOURCES:
            raise CorpusError(f"unknown source {self.source!r}, expected one of {SOURCES}")
        if not self.text.startswith(self.truncated):
            raise CorpusError(f"document {self.id}: truncated form is not a prefix of text")


@dataclass(frozen=True)
class GoldQA:
    """A human-authored question with its acceptable answers.

    `question_id` is the SQuAD-layout `qas[].id` when present, else a
    stable derived id; the experiment runner joins predictions on it.
    """

    context_id: str
    question: str
    answers: tuple[str, ...]
    question_id: str = field(default="")

    def __post_init__(self):
        if not self.question.strip():
            raise CorpusError(f"gold question {self.question_id or '?'} is empty")
        if not self.answers or any(not a.strip() for a in self.answers):
            raise CorpusError(f"gold question {self.question_id or '?'} has an empty answer")


def truncate_context(text: str, limit: int = DEFAULT_TRUNCATE_LIMIT) -> str:
    """Longest prefix of `text` with at most `limit` Unicode scalar values.

    Python strings index by scalar value, so slicing can never split one.
    Total function: any text, any limit >= 1.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    return text[:limit]


def make_document(
    doc_id: str,
    source: str,
    text: str,
    title: str | None = None,
    truncate_limit: int = DEFAULT_TRUNCATE_LIMIT,
) -> ContextDocument:
    return ContextDocument(
        id=doc_id,
        source=source,
        text=text,
        truncated=truncate_context(text, truncate_limit),
        title=title,
    )


def load_squad_json(
    path: str | Path,
    truncate_limit: int = DEFAULT_TRUNCATE_LIMIT,
) -> tuple[list[ContextDocument], list[GoldQA]]:
    """Load a SQuAD-layout JSON file into contexts (source=jsquad) and gold QA pairs.

    Paragraph contexts are deduplicated by exact text match; the first-seen
    id is retained and later paragraphs' qas attach to it.
    """
    path = Path(path)
    raw = path.read_text(encoding="utf-8")
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        byte_offset = len(raw[: exc.pos].encode("utf-8"))
        raise CorpusError(
            f"{path}: malformed JSON at line {exc.lineno} column {exc.colno} (byte offset {byte_offset}): {exc.msg}"
        ) from exc

    if not isinstance(payload, dict) or "data" not in payload:
        raise CorpusError(f"{path}: missing top-level key 'data'")

    documents: list[ContextDocument] = []
    by_text: dict[str, str] = {}
    gold: list[GoldQA] = []
    seq = 0

    for ai, article in enumerate(payload["data"]):
        if "paragraphs" not in article:
            raise CorpusError(f"{path}: data[{ai}] missing key 'paragraphs'")
        title = article.get("title")
        for pi, paragraph in enumerate(article["paragraphs"]):
            if "context" not in paragraph:
                raise CorpusError(f"{path}: data[{ai}].paragraphs[{pi}] missing key 'context'")
            if "qas" not in paragraph:
                raise CorpusError(f"{path}: data[{ai}].paragraphs[{pi}] missing key 'qas'")
            context_text = paragraph["context"]
            ctx_id = by_text.get(context_text)
            if ctx_id is None:
                ctx_id = f"jsquad-{seq:06d}"
                seq += 1
                by_text[context_text] = ctx_id
                documents.append(
                    make_document(ctx_id, "jsquad", context_text, title, truncate_limit)
                )
            for qi, qa in enumerate(paragraph["qas"]):
                if "question" not in qa:
                    raise CorpusError(
                        f"{path}: data[{ai}].paragraphs[{pi}].qas[{qi}] missing key 'question'"
                    )
                answers = [a["text"] for a in qa.get("answers", []) if a.get("text", "").strip()]
                if not answers:
                    raise CorpusError(
                        f"{path}: data[{ai}].paragraphs[{pi}].qas[{qi}] has no non-empty answers"
                    )
                gold.append(
                    GoldQA(
                        context_id=ctx_id,
                        question=qa["question"],
                        answers=tuple(answers),
                        question_id=str(qa.get("id") or f"{ctx_id}-q{qi}"),
                    )
                )
    logger.info("loaded %d contexts and %d gold QA pairs from %s", len(documents), len(gold), path)
    return documents, gold


def load_jsonl_corpus(
    path: str | Path,
    source: str,
    truncate_limit: int = DEFAULT_TRUNCATE_LIMIT,
) -> list[ContextDocument]:
    """Load a JSONL corpus (one object per line: `id`, `text`, optional `title`).

    Blank lines are skipped. Duplicate ids are rejected, naming both lines.
    """
    path = Path(path)
    documents: list[ContextDocument] = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: line {lineno}: invalid JSON: {exc.msg}") from exc
            for key in ("id", "text"):
                if key not in record:
                    raise CorpusError(f"{path}: line {lineno}: missing field {key}")
            doc_id = str(record["id"])
            if doc_id in seen:
                raise CorpusError(
                    f"{path}: duplicate id {doc_id!r} on lines {seen[doc_id]} and {lineno}"
                )
            seen[doc_id] = lineno
            documents.append(
                make_document(doc_id, source, record["text"], record.get("title"), truncate_limit)
            )
    return documents


def sample_contexts(docs: list[ContextDocument], k: int, seed: int) -> list[ContextDocument]:
    """Uniform sample of k documents without replacement, original order preserved.

    Deterministic for a fixed (document order, k, seed); see qasynth.sampling
    for the exact scheme.
    """
    return sample_preserving_order(docs, k, seed)


def write_corpus_jsonl(docs: Iterable[ContextDocument], path: str | Path) -> int:
    """Write documents in the canonical corpus JSONL layout; returns the count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for doc in docs:
            handle.write(
                json.dumps(
                    {
                        "id": doc.id,
                        "source": doc.source,
                        "title": doc.title,
                        "text": doc.text,
                        "truncated": doc.truncated,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
            count += 1
    return count


def read_corpus_jsonl(path: str | Path) -> list[ContextDocument]:
    """Read documents written by write_corpus_jsonl."""
    path = Path(path)
    documents = []
    for lineno, record in iter_jsonl(path):
        try:
            documents.append(
                ContextDocument(
                    id=record["id"],
                    source=record["source"],
                    text=record["text"],
                    truncated=record["truncated"],
                    title=record.get("title"),
                )
            )
        except KeyError as exc:
            raise CorpusError(f"{path}: line {lineno}: missing field {exc.args[0]}") from exc
    return documents


def write_gold_jsonl(gold: Iterable[GoldQA], path: str | Path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for qa in gold:
            handle.write(
                json.dumps(
                    {
                        "question_id": qa.question_id,
                        "context_id": qa.context_id,
                        "question": qa.question,
                        "answers": list(qa.answers),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
            count += 1
    return count


def read_gold_jsonl(path: str | Path) -> list[GoldQA]:
    path = Path(path)
    gold = []
    for lineno, record in iter_jsonl(path):
        try:
            gold.append(
                GoldQA(
                    context_id=record["context_id"],
                    question=record["question"],
                    answers=tuple(record["answers"]),
                    question_id=record.get("question_id", ""),
                )
            )
        except KeyError as exc:
            raise CorpusError(f"{path}: line {lineno}: missing field {exc.args[0]}") from exc
    return gold


def retruncate(doc: ContextDocument, limit: int) -> ContextDocument:
    """Document with its truncated form recomputed under a different limit."""
    return replace(doc, truncated=truncate_context(doc.text, limit))
