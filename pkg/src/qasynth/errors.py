"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class QasynthError(Exception):
    """Base class for all toolkit errors."""


class CorpusError(QasynthError):
    """Malformed or inconsistent corpus input (bad JSON, missing fields, duplicate ids)."""


class SampleSizeError(CorpusError):
    """Requested sample size exceeds the population."""

    def __init__(self, requested: int, available: int):
        super().__init__(f"cannot sample {requested} items from a population of {available}")
        self.requested = requested
        self.available = available


class PromptError(QasynthError):
    """Invalid prompt construction request (empty inputs, exemplar arity mismatch)."""


class GatewayError(QasynthError):
    """Base class for chat-completion gateway failures."""


class GatewayConfigurationError(GatewayError):
    """Endpoint or credential missing before any network call."""


class RequestError(GatewayError):
    """Non-retryable HTTP failure (4xx other than 429)."""

    def __init__(self, status_code: int, body_excerpt: str):
        super().__init__(f"request rejected with HTTP {status_code}: {body_excerpt}")
        self.status_code = status_code
        self.body_excerpt = body_excerpt


class RetriesExhaustedError(GatewayError):
    """All retry attempts failed; carries the last underlying cause."""

    def __init__(self, attempts: int, last_cause: Exception):
        super().__init__(f"gave up after {attempts} attempts: {last_cause}")
        self.attempts = attempts
        self.last_cause = last_cause


class QAParseError(QasynthError):
    """Model output could not be parsed into QA pairs after the repair ladder."""

    def __init__(self, message: str, ladder_trace: tuple[str, ...] = ()):
        super().__init__(message)
        self.ladder_trace = tuple(ladder_trace)


class QASchemaError(QAParseError):
    """Output parsed as JSON but does not carry the Question/Answer schema."""

    def __init__(self, message: str, ladder_trace: list[str] | None = None):
        super().__init__(message, ladder_trace or [])


class IntegrityError(QasynthError):
    """Cross-record referential failure (e.g. pair pointing at an unknown context)."""


class MetricError(QasynthError):
    """Invalid metric input (length mismatch, empty token list, dimension mismatch)."""


class ConfigError(QasynthError):
    """Invalid pipeline configuration; names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


class AnnotationError(QasynthError):
    """Annotation service failures (unknown session/judge/item, bad verdict)."""


class AnnotationNotFound(AnnotationError):
    """Referenced session, judge, or item does not exist."""
