"""Human-judgment service: sessions, item dispensing, durable verdicts.

State lives in an append-only JSONL event log; every acknowledged write
is flushed and fsynced before the caller sees the ack, and startup
replays the log, so a hard kill loses nothing that was acknowledged.

Judges see blinded payloads: the item sent to a judge carries no field
identifying which system produced the answer. Assignment is partitioned
round-robin by default (each item belongs to exactly one judge, so one
verdict resolves it); "overlap" mode assigns every item to every judge
and resolves by strict majority once all assigned judges have voted.
"""

# No `from __future__ import annotations` here: the route handlers are
# defined inside create_app and their annotations must stay live objects.
# Stringified annotations cannot be resolved from closure locals, which
# downgrades body and Request parameters to query parameters.

import hashlib
import json
import logging
import os
import threading
import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from .corpus import GoldQA
from .errors import AnnotationError, AnnotationNotFound
from .metrics import accuracy
from .sampling import sample_indices

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

VERDICTS = ("correct", "incorrect")
MODE_PARTITIONED = "partitioned"
MODE_OVERLAP = "overlap"
MODES = (MODE_PARTITIONED, MODE_OVERLAP)


@dataclass(frozen=True)
class AnnotationItem:
    item_id: str
    question: str
    context_text: str
    answer: str
    system_label: str

    def judge_payload(self) -> dict:
        # blinded view: no system identity
        return {
            "item_id": self.item_id,
            "question": self.question,
            "context_text": self.context_text,
            "answer": self.answer,
        }


@dataclass(frozen=True)
class Judgment:
    item_id: str
    judge_id: str
    verdict: str
    timestamp: float

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise AnnotationError(f"unknown verdict {self.verdict!r}, expected one of {VERDICTS}")


@dataclass
class SessionState:
    session_id: str
    mode: str
    sample_seed: int
    judges: tuple[str, ...]
    items: tuple[AnnotationItem, ...]
    judgments: dict[tuple[str, str], Judgment]

    def assigned_judges(self, index: int) -> tuple[str, ...]:
        if self.mode == MODE_OVERLAP:
            return self.judges
        return (self.judges[index % len(self.judges)],)


def build_annotation_items(
    eval_set: Sequence[GoldQA],
    contexts: Mapping[str, object],
    answers: Mapping[str, str],
    system_label: str,
    id_prefix: str = "item",
) -> list[AnnotationItem]:
    """Question/context/answer tuples for judging, with opaque item ids.

    ``answers`` maps question_id to the answer under evaluation (a
    system's prediction, or the gold answer itself for a gold session).
    Gold items without an answer are left out. Item ids are positional
    so judge payloads carry nothing that hints at the system.
    """
    items = []
    for gold in eval_set:
        if gold.question_id not in answers:
            continue
        doc = contexts.get(gold.context_id)
        if doc is None:
            raise AnnotationError(f"gold item references unknown context {gold.context_id!r}")
        items.append(
            AnnotationItem(
                item_id=f"{id_prefix}-{len(items):06d}",
                question=gold.question,
                context_text=doc.text,
                answer=answers[gold.question_id],
                system_label=system_label,
            )
        )
    return items


def _derive_session_id(items: Sequence[AnnotationItem], seed: int, sample_size: int) -> str:
    digest = hashlib.sha256()
    digest.update(f"{seed}:{sample_size}:".encode())
    for item in items:
        digest.update(item.item_id.encode("utf-8"))
        digest.update(b"\x00")
    return "s-" + digest.hexdigest()[:12]


class AnnotationStore:
    """Event-sourced session state over one append-only log file."""

    def __init__(self, log_path: Path | str):
        self._log_path = Path(log_path)
        self._lock = threading.Lock()
        self._sessions: dict[str, SessionState] = {}
        self._log_path.parent.mkdir(parents=True, exist_ok=True)
        self._replay()
        self._handle = open(self._log_path, "a", encoding="utf-8")

    # -- persistence ------------------------------------------------------

    def _append(self, event: dict):
        self._handle.write(
            json.dumps(event, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n"
        )
        self._handle.flush()
        os.fsync(self._handle.fileno())

    def _replay(self):
        if not self._log_path.exists():
            return
        with open(self._log_path, encoding="utf-8") as handle:
            data = handle.read()
        applied = 0
        for line in data.splitlines(keepends=True):
            stripped = line.strip()
            if not stripped:
                continue
            if not line.endswith("\n"):
                # torn tail from a crash mid-write; it was never acked
                logger.warning("%s: ignoring torn final line", self._log_path)
                break
            try:
                event = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise AnnotationError(f"{self._log_path}: corrupt event log: {exc.msg}") from exc
            self._apply(event)
            applied += 1
        if applied:
            logger.info("%s: replayed %d events", self._log_path, applied)

    def _apply(self, event: dict):
        kind = event.get("event")
        if kind == "session_created":
            items = tuple(
                AnnotationItem(
                    item_id=i["item_id"],
                    question=i["question"],
                    context_text=i["context_text"],
                    answer=i["answer"],
                    system_label=i["system_label"],
                )
                for i in event["items"]
            )
            self._sessions[event["session_id"]] = SessionState(
                session_id=event["session_id"],
                mode=event["mode"],
                sample_seed=event["sample_seed"],
                judges=tuple(event["judges"]),
                items=items,
                judgments={},
            )
        elif kind == "judgment":
            session = self._sessions.get(event["session_id"])
            if session is None:
                raise AnnotationError(
                    f"event log references unknown session {event['session_id']!r}"
                )
            judgment = Judgment(
                item_id=event["item_id"],
                judge_id=event["judge_id"],
                verdict=event["verdict"],
                timestamp=event["timestamp"],
            )
            session.judgments[(judgment.item_id, judgment.judge_id)] = judgment
        else:
            raise AnnotationError(f"unknown event kind {kind!r} in log")

    # -- operations -------------------------------------------------------

    def create_session(
        self,
        items: Sequence[AnnotationItem],
        judges: Sequence[str],
        sample_size: int | None = None,
        seed: int = 0,
        mode: str = MODE_PARTITIONED,
        session_id: str | None = None,
    ) -> SessionState:
        if not items:
            raise AnnotationError("cannot create a session with no items")
        if not judges:
            raise AnnotationError("session needs at least one judge")
        if len(set(judges)) != len(judges):
            raise AnnotationError("judge ids must be unique")
        if mode not in MODES:
            raise AnnotationError(f"unknown mode {mode!r}, expected one of {MODES}")
        ids = [item.item_id for item in items]
        if len(set(ids)) != len(ids):
            raise AnnotationError("item ids must be unique")
        if sample_size is None:
            sample_size = len(items)
        # deterministic order-preserving sample, same scheme as corpus
        # sampling; SampleSizeError propagates on oversize
        chosen = [items[i] for i in sample_indices(len(items), sample_size, seed)]
        if session_id is None:
            session_id = _derive_session_id(chosen, seed, sample_size)

        with self._lock:
            if session_id in self._sessions:
                raise AnnotationError(f"session {session_id!r} already exists")
            event = {
                "event": "session_created",
                "schema_version": SCHEMA_VERSION,
                "session_id": session_id,
                "mode": mode,
                "sample_seed": seed,
                "judges": list(judges),
                "items": [
                    {
                        "item_id": i.item_id,
                        "question": i.question,
                        "context_text": i.context_text,
                        "answer": i.answer,
                        "system_label": i.system_label,
                    }
                    for i in chosen
                ],
            }
            self._apply(event)
            self._append(event)
            return self._sessions[session_id]

    def _session(self, session_id: str) -> SessionState:
        session = self._sessions.get(session_id)
        if session is None:
            raise AnnotationNotFound(f"unknown session {session_id!r}")
        return session

    def session_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._sessions)

    def next_item(self, session_id: str, judge_id: str) -> tuple[int, AnnotationItem] | None:
        """Lowest-indexed assigned-but-unjudged item for this judge, or None."""
        with self._lock:
            session = self._session(session_id)
            if judge_id not in session.judges:
                raise AnnotationNotFound(f"judge {judge_id!r} is not part of this session")
            for index, item in enumerate(session.items):
                if judge_id not in session.assigned_judges(index):
                    continue
                if (item.item_id, judge_id) not in session.judgments:
                    return index, item
            return None

    def submit_judgment(self, session_id: str, judgment: Judgment) -> dict:
        """Persist a verdict; idempotent when unchanged, audited when changed."""
        with self._lock:
            session = self._session(session_id)
            if judgment.judge_id not in session.judges:
                raise AnnotationNotFound(f"judge {judgment.judge_id!r} is not part of this session")
            index = next(
                (i for i, item in enumerate(session.items) if item.item_id == judgment.item_id),
                None,
            )
            if index is None:
                raise AnnotationNotFound(f"unknown item {judgment.item_id!r}")
            if judgment.judge_id not in session.assigned_judges(index):
                raise AnnotationError(
                    f"item {judgment.item_id!r} is not assigned to judge {judgment.judge_id!r}"
                )
            existing = session.judgments.get((judgment.item_id, judgment.judge_id))
            if existing is not None and existing.verdict == judgment.verdict:
                return {"status": "ok", "changed": False, "duplicate": True}
            event = {
                "event": "judgment",
                "schema_version": SCHEMA_VERSION,
                "session_id": session_id,
                "item_id": judgment.item_id,
                "judge_id": judgment.judge_id,
                "verdict": judgment.verdict,
                "timestamp": judgment.timestamp,
                "previous_verdict": existing.verdict if existing else None,
            }
            self._apply(event)
            self._append(event)
            return {"status": "ok", "changed": existing is not None, "duplicate": False}

    def resolved_verdicts(self, session_id: str) -> dict[str, str]:
        """item_id -> final verdict for every resolved item."""
        with self._lock:
            return self._resolved_locked(self._session(session_id))

    def _resolved_locked(self, session: SessionState) -> dict[str, str]:
        resolved: dict[str, str] = {}
        for index, item in enumerate(session.items):
            assigned = session.assigned_judges(index)
            votes = [
                session.judgments[(item.item_id, judge)].verdict
                for judge in assigned
                if (item.item_id, judge) in session.judgments
            ]
            if session.mode == MODE_PARTITIONED:
                if votes:
                    resolved[item.item_id] = votes[0]
            else:
                if len(votes) == len(assigned):
                    correct = votes.count("correct")
                    incorrect = votes.count("incorrect")
                    if correct != incorrect:
                        resolved[item.item_id] = (
                            "correct" if correct > incorrect else "incorrect"
                        )
        return resolved

    def session_stats(self, session_id: str) -> dict:
        with self._lock:
            session = self._session(session_id)
            judged_counts = {judge: 0 for judge in session.judges}
            for (_, judge_id) in session.judgments:
                judged_counts[judge_id] += 1
            resolved = self._resolved_locked(session)
            correct = sum(1 for verdict in resolved.values() if verdict == "correct")
            defined = bool(resolved)
            return {
                "schema_version": SCHEMA_VERSION,
                "session_id": session_id,
                "mode": session.mode,
                "total_items": len(session.items),
                "judged_counts": judged_counts,
                "resolved_items": len(resolved),
                "unresolved_items": len(session.items) - len(resolved),
                "correct_items": correct,
                "accuracy": accuracy(
                    [verdict == "correct" for verdict in resolved.values()]
                )
                if defined
                else None,
                "accuracy_defined": defined,
            }

    def progress(self, session_id: str, judge_id: str) -> dict:
        with self._lock:
            session = self._session(session_id)
            if judge_id not in session.judges:
                raise AnnotationNotFound(f"judge {judge_id!r} is not part of this session")
            assigned = [
                item
                for index, item in enumerate(session.items)
                if judge_id in session.assigned_judges(index)
            ]
            judged = sum(
                1 for item in assigned if (item.item_id, judge_id) in session.judgments
            )
            return {"judged": judged, "total": len(assigned)}

    def close(self):
        self._handle.close()


# ---------------------------------------------------------------------------
# HTTP surface


def create_app(store: AnnotationStore, judge_token: str | None = None):
    from fastapi import FastAPI, HTTPException, Query, Request
    from fastapi.middleware.cors import CORSMiddleware
    from pydantic import BaseModel, Field

    app = FastAPI(title="qa-annotation", version=str(SCHEMA_VERSION))
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    class ItemIn(BaseModel):
        item_id: str
        question: str
        context_text: str
        answer: str
        system_label: str

    class SessionIn(BaseModel):
        items: list[ItemIn]
        judges: list[str]
        sample_size: int | None = None
        seed: int = 0
        mode: str = MODE_PARTITIONED
        session_id: str | None = None

    class JudgmentIn(BaseModel):
        item_id: str
        judge_id: str
        verdict: str
        timestamp: float | None = Field(default=None)

    def _check_token(request: Request):
        if judge_token is not None and request.headers.get("x-judge-token") != judge_token:
            raise HTTPException(status_code=401, detail="missing or invalid judge token")

    def _translate(exc: AnnotationError) -> HTTPException:
        if isinstance(exc, AnnotationNotFound):
            return HTTPException(status_code=404, detail=str(exc))
        return HTTPException(status_code=400, detail=str(exc))

    @app.post("/sessions")
    def post_session(body: SessionIn, request: Request):
        _check_token(request)
        items = [AnnotationItem(**item.model_dump()) for item in body.items]
        try:
            session = store.create_session(
                items,
                judges=body.judges,
                sample_size=body.sample_size,
                seed=body.seed,
                mode=body.mode,
                session_id=body.session_id,
            )
        except AnnotationError as exc:
            raise _translate(exc) from exc
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": session.session_id,
            "total_items": len(session.items),
            "judges": list(session.judges),
            "mode": session.mode,
        }

    @app.get("/sessions/{session_id}/next")
    def get_next(session_id: str, request: Request, judge: str = Query(...)):
        _check_token(request)
        try:
            found = store.next_item(session_id, judge)
            progress = store.progress(session_id, judge)
        except AnnotationError as exc:
            raise _translate(exc) from exc
        if found is None:
            return {"schema_version": SCHEMA_VERSION, "done": True, "progress": progress}
        index, item = found
        return {
            "schema_version": SCHEMA_VERSION,
            "done": False,
            "index": index,
            "item": item.judge_payload(),
            "progress": progress,
        }

    @app.post("/sessions/{session_id}/judgments")
    def post_judgment(session_id: str, body: JudgmentIn, request: Request):
        _check_token(request)
        try:
            judgment = Judgment(
                item_id=body.item_id,
                judge_id=body.judge_id,
                verdict=body.verdict,
                timestamp=body.timestamp if body.timestamp is not None else time.time(),
            )
            ack = store.submit_judgment(session_id, judgment)
        except AnnotationError as exc:
            raise _translate(exc) from exc
        ack["schema_version"] = SCHEMA_VERSION
        return ack

    @app.get("/sessions/{session_id}/stats")
    def get_stats(session_id: str, request: Request):
        _check_token(request)
        try:
            return store.session_stats(session_id)
        except AnnotationError as exc:
            raise _translate(exc) from exc

    return app


def serve(store: AnnotationStore, host: str = "127.0.0.1", port: int = 8787, judge_token: str | None = None):
    import uvicorn

    uvicorn.run(create_app(store, judge_token=judge_token), host=host, port=port, log_level="warning")
