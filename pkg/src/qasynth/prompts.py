"""Prompt construction for QA-pair synthesis and answer generation.

Templates are versioned text files under ``qasynth/templates``; the
English set transcribes the published figures, the Japanese set is the
canonical one for paper-faithful runs (selected per run). A synthesis
prompt is one user message laid out as:

    <instruction block>

    ## example
    <input format line / worked exemplar>
    output:<schema object, or JSON array of n objects>

    ## input
    texts:<truncated context>
    output:

The zero-shot example block shows only the input/output format; the
one-shot block carries a concrete exemplar. For n > 1 the output schema
becomes a JSON array of n ``{"Question": ..., "Answer": ...}`` objects.
The example block's payload (everything after ``output:``) always parses
as JSON, which is the format the model is asked to imitate.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources

from .corpus import ContextDocument
from .errors import PromptError

logger = logging.getLogger(__name__)

ZERO_SHOT = "zero_shot"
ONE_SHOT = "one_shot"
MODES = (ZERO_SHOT, ONE_SHOT)

PAPER_N_VALUES = (1, 3)
DEFAULT_TEMPLATE = "ja/v1"
ANSWER_TEMPLATE_VERSION = "v1"


@dataclass(frozen=True)
class PromptSpec:
    """A rendered prompt: ordered chat messages plus how it was built."""

    messages: tuple[tuple[str, str], ...]
    mode: str
    n_pairs: int
    template_version: str

    def __post_init__(self):
        if not any(role == "user" for role, _ in self.messages):
            raise PromptError("a prompt needs at least one user message")
        if any(not content for _, content in self.messages):
            raise PromptError("prompt messages must be non-empty")

    @property
    def text(self) -> str:
        """The single rendered prompt body (first user message)."""
        return next(content for role, content in self.messages if role == "user")

    @property
    def paper_faithful_n(self) -> bool:
        return self.n_pairs in PAPER_N_VALUES


@dataclass(frozen=True)
class FewShotExample:
    """A worked exemplar for the one-shot example block.

    ``raw_text`` overrides generic rendering with a verbatim block; the
    shipped default exemplar uses it to reproduce the canonical wording
    exactly. ``qa_pairs`` always carries the pairs for arity checking.
    """

    context_text: str
    qa_pairs: tuple[tuple[str, str], ...]
    raw_text: str | None = None

    def __post_init__(self):
        if not self.context_text.strip():
            raise PromptError("an exemplar needs a non-empty context")
        if not self.qa_pairs:
            raise PromptError("an exemplar needs at least one QA pair")
        if any(not q.strip() or not a.strip() for q, a in self.qa_pairs):
            raise PromptError("exemplar questions and answers must be non-empty")


def _read_template(relpath: str) -> str:
    try:
        text = (resources.files("qasynth") / "templates" / relpath).read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise PromptError(f"unknown template file {relpath!r}") from exc
    # Template files are POSIX text files; the final newline is not part
    # of the template content.
    return text[:-1] if text.endswith("\n") else text


def available_templates() -> list[str]:
    root = resources.files("qasynth") / "templates"
    found = []
    for lang in root.iterdir():
        if lang.name == "answer" or not lang.is_dir():
            continue
        for version in lang.iterdir():
            found.append(f"{lang.name}/{version.name}")
    return sorted(found)


def _qa_object(question: str, answer: str) -> str:
    q = json.dumps(question, ensure_ascii=False)
    a = json.dumps(answer, ensure_ascii=False)
    return f'{{"Question":{q}, "Answer":{a}}}'


def _payload(objects: list[str]) -> str:
    if len(objects) == 1:
        return objects[0]
    return "[" + ", ".join(objects) + "]"


def zero_shot_example_payload(n: int, template: str = DEFAULT_TEMPLATE) -> str:
    """The JSON payload shown after ``output:`` in the zero-shot example block."""
    schema_object = _read_template(f"{template}/example_output_object.txt")
    return _payload([schema_object] * n)


def _render_example_block(
    n: int,
    mode: str,
    example: FewShotExample | None,
    template: str,
) -> str:
    if mode == ZERO_SHOT:
        if example is not None:
            raise PromptError("zero-shot prompts take no exemplar")
        input_line = _read_template(f"{template}/example_input.txt")
        return f"{input_line}\noutput:{zero_shot_example_payload(n, template)}"
    if example is None:
        raise PromptError("one-shot prompts require an exemplar")
    if len(example.qa_pairs) != n:
        raise PromptError(
            f"exemplar has {len(example.qa_pairs)} QA pairs but the prompt requests n={n}"
        )
    if example.raw_text is not None:
        return example.raw_text
    context = json.dumps(example.context_text, ensure_ascii=False)
    payload = _payload([_qa_object(q, a) for q, a in example.qa_pairs])
    return f"texts:{context}\n\noutput:{payload}"


def build_synthesis_prompt(
    context: ContextDocument,
    n: int,
    mode: str,
    example: FewShotExample | None = None,
    template: str = DEFAULT_TEMPLATE,
) -> PromptSpec:
    """Render the QA-pair synthesis prompt for one context.

    The context is substituted in its truncated form, unquoted, into the
    ``## input`` block. Delivered as a single user-role message.
    """
    if n < 1:
        raise PromptError("n must be >= 1")
    if mode not in MODES:
        raise PromptError(f"unknown prompt mode {mode!r}, expected one of {MODES}")
    if n not in PAPER_N_VALUES:
        logger.warning("n=%d is outside the paper-faithful set %s", n, PAPER_N_VALUES)

    instructions = _read_template(f"{template}/instructions.txt")
    example_block = _render_example_block(n, mode, example, template)
    body = (
        f"{instructions}\n"
        f"\n"
        f"## example\n"
        f"{example_block}\n"
        f"\n"
        f"## input\n"
        f"texts:{context.truncated}\n"
        f"output:"
    )
    return PromptSpec(
        messages=(("user", body),),
        mode=mode,
        n_pairs=n,
        template_version=template,
    )


def default_one_shot_example(template: str = DEFAULT_TEMPLATE) -> FewShotExample:
    """The shipped n=1 exemplar for `template`, reproduced verbatim."""
    raw = _read_template(f"{template}/one_shot_example.txt")
    output_line = raw.rsplit("\n", 1)[-1]
    if not output_line.startswith("output:"):
        raise PromptError(f"template {template} exemplar has no output line")
    parsed = json.loads(output_line[len("output:"):])
    context_line = raw.split("\n", 1)[0]
    return FewShotExample(
        context_text=context_line[len("texts:"):],
        qa_pairs=((parsed["Question"], parsed["Answer"]),),
        raw_text=raw,
    )


_HEADERS = ("## Instruction", "## Context", "## Response")


def build_answer_prompt(question: str, context_text: str) -> PromptSpec:
    """Render the answer-generation prompt (Instruction / Context / Response).

    Substitution is verbatim: a question or context containing one of the
    section header lines is kept as-is and only flagged with a warning.
    """
    if not question.strip():
        raise PromptError("question must be non-empty")
    if not context_text.strip():
        raise PromptError("context must be non-empty")
    for name, value in (("question", question), ("context", context_text)):
        if any(line.strip() in _HEADERS for line in value.splitlines()):
            logger.warning("%s contains a literal template header line; substituted verbatim", name)

    body = (
        _read_template(f"answer/{ANSWER_TEMPLATE_VERSION}.txt")
        .replace("{QUESTION}", question)
        .replace("{CONTEXT}", context_text)
    )
    return PromptSpec(
        messages=(("user", body),),
        mode=ZERO_SHOT,
        n_pairs=1,
        template_version=f"answer/{ANSWER_TEMPLATE_VERSION}",
    )
