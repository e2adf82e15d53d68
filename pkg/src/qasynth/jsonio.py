"""Canonical JSON serialization and JSONL helpers.

All persisted lines go through ``canonical_dumps`` so that identical
in-memory values serialize to identical bytes on every platform and run
(sorted keys, compact separators, raw UTF-8).
"""

from __future__ import annotations

import json
from collections.abc import Iterator
from pathlib import Path
from typing import Any

from .errors import IntegrityError


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def iter_jsonl(path: Path | str) -> Iterator[tuple[int, Any]]:
    """Yield (1-based line number, parsed object) for each JSONL line."""
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                yield lineno, json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise IntegrityError(f"{path}: line {lineno}: malformed JSON: {exc.msg}") from exc


def write_jsonl(path: Path | str, objs) -> int:
    """Write objects one canonical JSON line each; returns the line count."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for obj in objs:
            handle.write(canonical_dumps(obj) + "\n")
            count += 1
    return count
