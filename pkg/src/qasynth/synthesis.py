"""Per-context QA generation: prompt, call, parse, validate, persist.

Model output parsing applies a three-step repair ladder (raw JSON, code
fences stripped, first balanced span) before giving up; every context
produces exactly one persisted record whatever happens, so failed
contexts stay auditable instead of vanishing.

The output file is append-only JSONL: one ``kind == "record"`` line per
context plus a terminal ``kind == "run_stats"`` manifest line. Resume
reads the ids already present and processes only the remainder; a torn
final line from a crash is truncated away first.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .corpus import ContextDocument
from .errors import (
    GatewayError,
    IntegrityError,
    QAParseError,
    QASchemaError,
)
from .gateway import ChatGateway, GenerationParams, estimate_cost
from .jsonio import canonical_dumps
from .prompts import (
    DEFAULT_TEMPLATE,
    ONE_SHOT,
    ZERO_SHOT,
    FewShotExample,
    build_synthesis_prompt,
    default_one_shot_example,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

STATUS_OK = "ok"
STATUS_PARSE_FAILED = "parse_failed"
STATUS_VALIDATION_FAILED = "validation_failed"
STATUS_LLM_FAILED = "llm_failed"
STATUSES = (STATUS_OK, STATUS_PARSE_FAILED, STATUS_VALIDATION_FAILED, STATUS_LLM_FAILED)


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    context_id: str
    prompt_mode: str
    n_requested: int
    model_id: str

    def __post_init__(self):
        if not self.question.strip() or not self.answer.strip():
            raise IntegrityError("QAPair question and answer must be non-empty")
        if not self.context_id:
            raise IntegrityError("QAPair needs a context_id")


@dataclass(frozen=True)
class SynthesisRecord:
    context_id: str
    raw_response: str
    pairs: tuple[QAPair, ...]
    status: str
    prompt_tokens: int
    completion_tokens: int
    error_detail: str | None = None

    def __post_init__(self):
        if self.status not in STATUSES:
            raise IntegrityError(f"unknown record status {self.status!r}")
        if self.status == STATUS_OK and not self.pairs:
            raise IntegrityError("ok records must carry at least one pair")
        if self.status != STATUS_OK and self.error_detail is None:
            raise IntegrityError(f"{self.status} records must carry error_detail")


# ---------------------------------------------------------------------------
# Parsing


_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*[ \t]*\r?\n(.*?)```", re.DOTALL)


def _first_balanced_span(raw: str) -> str | None:
    start = None
    for i, ch in enumerate(raw):
        if ch in "{[":
            start = i
            break
    if start is None:
        return None
    stack: list[str] = []
    in_string = False
    escaped = False
    for j in range(start, len(raw)):
        ch = raw[j]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "{[":
            stack.append(ch)
        elif ch in "}]":
            if not stack or (stack[-1] + ch) not in ("{}", "[]"):
                return None
            stack.pop()
            if not stack:
                return raw[start : j + 1]
    return None


def _extract_pair(item, index: int) -> tuple[str, str]:
    if not isinstance(item, dict):
        raise QASchemaError(f"item {index} is {type(item).__name__}, expected an object")
    by_lower = {}
    for key, value in item.items():
        if isinstance(key, str):
            by_lower.setdefault(key.lower(), value)
    for key in ("question", "answer"):
        if key not in by_lower:
            raise QASchemaError(f"item {index} is missing key '{key.capitalize()}'")
        if not isinstance(by_lower[key], str):
            raise QASchemaError(
                f"item {index} key '{key.capitalize()}' is "
                f"{type(by_lower[key]).__name__}, expected a string"
            )
    return by_lower["question"], by_lower["answer"]


def parse_qa_output(raw: str, expected_n: int) -> list[tuple[str, str]]:
    """Extract up to expected_n (question, answer) pairs from model output.

    Repair ladder: parse as-is, then with code fences stripped, then the
    first balanced JSON span. Key lookup is case-insensitive. A single
    object counts as a one-element array; extra pairs are dropped with a
    warning, not an error.
    """
    if expected_n < 1:
        raise ValueError("expected_n must be >= 1")

    trace: list[str] = []
    parsed = None
    found = False

    def _try(step: str, candidate: str | None) -> bool:
        nonlocal parsed, found
        if candidate is None:
            trace.append(f"{step}: no candidate text found")
            return False
        try:
            parsed = json.loads(candidate)
            trace.append(f"{step}: parsed")
            found = True
            return True
        except json.JSONDecodeError as exc:
            trace.append(f"{step}: {exc.msg} at char {exc.pos}")
            return False

    fence_match = _FENCE_RE.search(raw)
    (
        _try("raw", raw)
        or _try("fences_stripped", fence_match.group(1) if fence_match else None)
        or _try("balanced_span", _first_balanced_span(raw))
    )
    if not found:
        raise QAParseError("model output is not JSON after all repair steps", tuple(trace))

    items = parsed if isinstance(parsed, list) else [parsed]
    if not items:
        raise QASchemaError("parsed JSON array is empty")
    pairs = [_extract_pair(item, i) for i, item in enumerate(items)]
    if len(pairs) > expected_n:
        logger.warning(
            "model returned %d pairs, expected at most %d; extra pairs dropped",
            len(pairs),
            expected_n,
        )
        pairs = pairs[:expected_n]
    return pairs


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class ValidationPolicy:
    max_question_chars: int = 500
    max_answer_chars: int = 1000
    grounding_enabled: bool = False
    grounding_threshold: float = 0.3


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str | None = None


def _char_bigrams(text: str) -> set[str]:
    if len(text) < 2:
        # too short for bigrams; single characters keep the check total
        return set(text)
    return {text[i : i + 2] for i in range(len(text) - 1)}


def grounding_overlap(answer: str, context_text: str) -> float:
    """Fraction of the answer's character bigrams present in the context."""
    answer_grams = _char_bigrams(answer)
    if not answer_grams:
        return 0.0
    context_grams = _char_bigrams(context_text)
    return len(answer_grams & context_grams) / len(answer_grams)


def validate_qa(
    pair: tuple[str, str],
    context: ContextDocument,
    policy: ValidationPolicy,
) -> Verdict:
    """Accept or reject one parsed (question, answer) pair. Total: never raises."""
    question, answer = pair
    if not question.strip():
        return Verdict(False, "empty_question")
    if not answer.strip():
        return Verdict(False, "empty_answer")
    if question.strip() == answer.strip():
        return Verdict(False, "question_equals_answer")
    if len(question.strip()) > policy.max_question_chars:
        return Verdict(False, "question_too_long")
    if len(answer.strip()) > policy.max_answer_chars:
        return Verdict(False, "answer_too_long")
    if policy.grounding_enabled:
        # checked against the truncated text: that is all the model saw
        if grounding_overlap(answer, context.truncated) < policy.grounding_threshold:
            return Verdict(False, "not_grounded")
    return Verdict(True)


# ---------------------------------------------------------------------------
# Orchestration


@dataclass(frozen=True)
class SynthesisSettings:
    generation: GenerationParams
    n: int = 1
    prompt_mode: str = ZERO_SHOT
    template: str = DEFAULT_TEMPLATE
    policy: ValidationPolicy = field(default_factory=ValidationPolicy)
    concurrency: int = 1
    example: FewShotExample | None = None

    def __post_init__(self):
        if self.n < 1:
            raise IntegrityError("n must be >= 1")
        if self.concurrency < 1:
            raise IntegrityError("concurrency must be >= 1")
        if self.prompt_mode not in (ZERO_SHOT, ONE_SHOT):
            raise IntegrityError(f"unknown prompt_mode {self.prompt_mode!r}")


@dataclass
class RunStats:
    contexts_processed: int = 0
    status_counts: dict[str, int] = field(default_factory=dict)
    pairs_accepted: int = 0
    pairs_rejected: dict[str, int] = field(default_factory=dict)
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cost_estimate: float | None = None

    def add_record(self, record: SynthesisRecord, rejected: dict[str, int]):
        self.contexts_processed += 1
        self.status_counts[record.status] = self.status_counts.get(record.status, 0) + 1
        self.pairs_accepted += len(record.pairs)
        for reason, count in rejected.items():
            self.pairs_rejected[reason] = self.pairs_rejected.get(reason, 0) + count
        self.prompt_tokens += record.prompt_tokens
        self.completion_tokens += record.completion_tokens

    def to_json(self, settings: SynthesisSettings) -> dict:
        return {
            "kind": "run_stats",
            "schema_version": SCHEMA_VERSION,
            "contexts_processed": self.contexts_processed,
            "status_counts": dict(sorted(self.status_counts.items())),
            "pairs_accepted": self.pairs_accepted,
            "pairs_rejected": dict(sorted(self.pairs_rejected.items())),
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "cost_estimate": self.cost_estimate,
            "settings": {
                "n": settings.n,
                "prompt_mode": settings.prompt_mode,
                "template": settings.template,
                "model_id": settings.generation.model_id,
                "temperature": settings.generation.temperature,
                "max_output_tokens": settings.generation.max_output_tokens,
                "seed": settings.generation.seed,
            },
        }


def _record_to_json(record: SynthesisRecord) -> dict:
    return {
        "kind": "record",
        "schema_version": SCHEMA_VERSION,
        "context_id": record.context_id,
        "status": record.status,
        "raw_response": record.raw_response,
        "pairs": [
            {
                "question": p.question,
                "answer": p.answer,
                "prompt_mode": p.prompt_mode,
                "n_requested": p.n_requested,
                "model_id": p.model_id,
            }
            for p in record.pairs
        ],
        "usage": {
            "prompt_tokens": record.prompt_tokens,
            "completion_tokens": record.completion_tokens,
        },
        "error_detail": record.error_detail,
    }


def _record_from_json(obj: dict, path, lineno: int) -> SynthesisRecord:
    try:
        return SynthesisRecord(
            context_id=obj["context_id"],
            raw_response=obj["raw_response"],
            pairs=tuple(
                QAPair(
                    question=p["question"],
                    answer=p["answer"],
                    context_id=obj["context_id"],
                    prompt_mode=p["prompt_mode"],
                    n_requested=p["n_requested"],
                    model_id=p["model_id"],
                )
                for p in obj["pairs"]
            ),
            status=obj["status"],
            prompt_tokens=obj["usage"]["prompt_tokens"],
            completion_tokens=obj["usage"]["completion_tokens"],
            error_detail=obj.get("error_detail"),
        )
    except KeyError as exc:
        raise IntegrityError(f"{path}: line {lineno}: record missing field {exc}") from exc


def read_synthesis_file(path: Path | str) -> tuple[list[SynthesisRecord], dict | None]:
    """All records plus the last run-stats manifest object, if any."""
    records: list[SynthesisRecord] = []
    stats = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.get("kind")
            if kind == "record":
                records.append(_record_from_json(obj, path, lineno))
            elif kind == "run_stats":
                stats = obj
            else:
                raise IntegrityError(f"{path}: line {lineno}: unknown line kind {kind!r}")
    return records, stats


def _scan_resumable(path: Path) -> set[str]:
    """Ids already persisted; truncates a torn final line left by a crash."""
    done: set[str] = set()
    # byte mode throughout: seek and truncate offsets must be byte positions,
    # and a crash can tear a multibyte character in half
    with open(path, "r+b") as handle:
        data = handle.read()
        pos = 0
        for line in data.splitlines(keepends=True):
            stripped = line.strip()
            complete = line.endswith(b"\n")
            if stripped:
                try:
                    obj = json.loads(stripped.decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError):
                    if pos + len(line) >= len(data):
                        break
                    raise IntegrityError(
                        f"{path}: malformed line mid-file; refusing to resume"
                    ) from None
                if not complete:
                    # parsed but unterminated: treat as torn, rewrite it
                    break
                if obj.get("kind") == "record":
                    done.add(obj["context_id"])
            pos += len(line)
        if pos < len(data):
            logger.warning("%s: truncating %d bytes of torn tail", path, len(data) - pos)
            handle.seek(pos)
            handle.truncate()
    return done


def resolve_example(settings: SynthesisSettings) -> FewShotExample | None:
    if settings.prompt_mode != ONE_SHOT:
        return None
    example = settings.example
    if example is None:
        example = default_one_shot_example(settings.template)
    if len(example.qa_pairs) == settings.n:
        return example
    if settings.example is None and len(example.qa_pairs) == 1:
        # the stock exemplar shows one pair; for n pairs repeat it, the
        # same way the zero-shot schema block repeats its placeholder
        return FewShotExample(
            context_text=example.context_text,
            qa_pairs=example.qa_pairs * settings.n,
        )
    return example  # arity mismatch surfaces in build_synthesis_prompt


def synthesize_one(
    context: ContextDocument,
    gateway: ChatGateway,
    settings: SynthesisSettings,
    example: FewShotExample | None,
) -> tuple[SynthesisRecord, dict[str, int]]:
    """Process a single context; returns the record and rejection counts."""
    prompt = build_synthesis_prompt(
        context, settings.n, settings.prompt_mode, example=example, template=settings.template
    )
    try:
        result = gateway.chat_complete(prompt, settings.generation)
    except GatewayError as exc:
        record = SynthesisRecord(
            context_id=context.id,
            raw_response="",
            pairs=(),
            status=STATUS_LLM_FAILED,
            prompt_tokens=0,
            completion_tokens=0,
            error_detail=str(exc),
        )
        return record, {}

    try:
        parsed = parse_qa_output(result.text, settings.n)
    except QASchemaError as exc:
        record = SynthesisRecord(
            context_id=context.id,
            raw_response=result.text,
            pairs=(),
            status=STATUS_PARSE_FAILED,
            prompt_tokens=result.prompt_tokens,
            completion_tokens=result.completion_tokens,
            error_detail=str(exc),
        )
        return record, {}
    except QAParseError as exc:
        detail = str(exc) + " [" + "; ".join(exc.ladder_trace) + "]"
        record = SynthesisRecord(
            context_id=context.id,
            raw_response=result.text,
            pairs=(),
            status=STATUS_PARSE_FAILED,
            prompt_tokens=result.prompt_tokens,
            completion_tokens=result.completion_tokens,
            error_detail=detail,
        )
        return record, {}

    accepted: list[QAPair] = []
    rejected: dict[str, int] = {}
    reasons: list[str] = []
    for question, answer in parsed:
        verdict = validate_qa((question, answer), context, settings.policy)
        if verdict.accepted:
            accepted.append(
                QAPair(
                    question=question.strip(),
                    answer=answer.strip(),
                    context_id=context.id,
                    prompt_mode=settings.prompt_mode,
                    n_requested=settings.n,
                    model_id=settings.generation.model_id,
                )
            )
        else:
            rejected[verdict.reason] = rejected.get(verdict.reason, 0) + 1
            reasons.append(verdict.reason)

    if accepted:
        record = SynthesisRecord(
            context_id=context.id,
            raw_response=result.text,
            pairs=tuple(accepted),
            status=STATUS_OK,
            prompt_tokens=result.prompt_tokens,
            completion_tokens=result.completion_tokens,
        )
    else:
        record = SynthesisRecord(
            context_id=context.id,
            raw_response=result.text,
            pairs=(),
            status=STATUS_VALIDATION_FAILED,
            prompt_tokens=result.prompt_tokens,
            completion_tokens=result.completion_tokens,
            error_detail="all pairs rejected: " + ", ".join(reasons),
        )
    return record, rejected


def synthesize_dataset(
    contexts: list[ContextDocument],
    gateway: ChatGateway,
    settings: SynthesisSettings,
    out_path: Path | str,
    price_table: dict[str, tuple[float, float]] | None = None,
) -> RunStats:
    """Generate QA pairs for every context, appending records to out_path."""
    out_path = Path(out_path)
    ids = [c.id for c in contexts]
    if len(set(ids)) != len(ids):
        raise IntegrityError("input contexts contain duplicate ids")

    done: set[str] = set()
    if out_path.exists() and out_path.stat().st_size > 0:
        done = _scan_resumable(out_path)
        skipped = done.intersection(ids)
        if skipped:
            logger.info("resuming: %d of %d contexts already persisted", len(skipped), len(ids))

    todo = [c for c in contexts if c.id not in done]
    example = resolve_example(settings)
    stats = RunStats()
    usage_start = len(gateway.usage)

    with open(out_path, "a", encoding="utf-8") as handle:

        def emit(record: SynthesisRecord, rejected: dict[str, int]):
            handle.write(canonical_dumps(_record_to_json(record)) + "\n")
            handle.flush()
            stats.add_record(record, rejected)

        if settings.concurrency == 1:
            for context in todo:
                emit(*synthesize_one(context, gateway, settings, example))
        else:
            with ThreadPoolExecutor(max_workers=settings.concurrency) as pool:
                futures = [
                    pool.submit(synthesize_one, context, gateway, settings, example)
                    for context in todo
                ]
                # single writer consumes in submission order: output bytes
                # do not depend on scheduling
                for future in futures:
                    emit(*future.result())

        if price_table is not None:
            stats.cost_estimate = estimate_cost(gateway.usage[usage_start:], price_table)
        handle.write(canonical_dumps(stats.to_json(settings)) + "\n")
        handle.flush()
    return stats


def accepted_pairs(records: list[SynthesisRecord]) -> list[QAPair]:
    return [pair for record in records for pair in record.pairs]


def with_policy(settings: SynthesisSettings, policy: ValidationPolicy) -> SynthesisSettings:
    return replace(settings, policy=policy)
