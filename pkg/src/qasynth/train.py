"""Fine-tuning file emission and hyperparameter grid enumeration.

Each accepted QA pair becomes one training example: the prompt is the
answer-generation template rendered with the pair's question and its
context, ending at the ``## Response`` header; the supervision target is
the answer string alone. Synthetic pairs use the truncated context (what
the generator saw); gold pairs use the full source text.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from .corpus import ContextDocument, GoldQA
from .errors import ConfigError, IntegrityError
from .jsonio import canonical_dumps
from .prompts import build_answer_prompt
from .synthesis import SynthesisRecord

RESPONSE_HEADER = "## Response"


@dataclass(frozen=True)
class TrainExample:
    prompt_text: str
    target_text: str

    def __post_init__(self):
        if not self.prompt_text.endswith(RESPONSE_HEADER):
            raise IntegrityError("prompt_text must end with the response header")
        if not self.target_text:
            raise IntegrityError("target_text must be non-empty")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int
    learning_rate: float
    epochs: int
    lora_r: int
    lora_alpha: int

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1 or self.lora_r < 1 or self.lora_alpha < 1:
            raise ConfigError("grid", "counts must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("grid", "learning_rate must be positive")

    def to_json(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "lora_r": self.lora_r,
            "lora_alpha": self.lora_alpha,
        }


# search ranges for LoRA fine-tuning of the answer generator
PAPER_GRID_SETS: dict[str, tuple] = {
    "batch_size": (4, 8),
    "learning_rate": (1e-5, 5e-5, 1e-6),
    "epochs": (3, 4, 5),
    "lora_r": (4, 8, 16, 64, 128),
    "lora_alpha": (1, 4, 16),
}

_GRID_FIELD_ORDER = ("batch_size", "learning_rate", "epochs", "lora_r", "lora_alpha")


def _context_index(
    contexts: Sequence[ContextDocument] | Mapping[str, ContextDocument],
) -> Mapping[str, ContextDocument]:
    if isinstance(contexts, Mapping):
        return contexts
    return {doc.id: doc for doc in contexts}


def training_examples(
    records: Sequence[SynthesisRecord] | Sequence[GoldQA],
    contexts: Sequence[ContextDocument] | Mapping[str, ContextDocument],
) -> list[TrainExample]:
    """Render TrainExamples for accepted synthetic pairs or gold QA."""
    index = _context_index(contexts)
    examples: list[TrainExample] = []
    for item in records:
        if isinstance(item, SynthesisRecord):
            for pair in item.pairs:
                doc = index.get(pair.context_id)
                if doc is None:
                    raise IntegrityError(
                        f"pair references unknown context {pair.context_id!r}"
                    )
                prompt = build_answer_prompt(pair.question, doc.truncated)
                examples.append(TrainExample(prompt.text, pair.answer))
        elif isinstance(item, GoldQA):
            doc = index.get(item.context_id)
            if doc is None:
                raise IntegrityError(f"gold pair references unknown context {item.context_id!r}")
            prompt = build_answer_prompt(item.question, doc.text)
            examples.append(TrainExample(prompt.text, item.answers[0]))
        else:
            raise IntegrityError(f"cannot emit training data from {type(item).__name__}")
    return examples


def emit_training_file(
    records: Sequence[SynthesisRecord] | Sequence[GoldQA],
    contexts: Sequence[ContextDocument] | Mapping[str, ContextDocument],
    path: Path | str,
) -> int:
    """Write one {"prompt", "response"} JSONL line per QA pair; returns count."""
    examples = training_examples(records, contexts)
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(
                canonical_dumps({"prompt": example.prompt_text, "response": example.target_text})
                + "\n"
            )
    return len(examples)


def emit_hyperparam_grid(sets: Mapping[str, Sequence] | None = None) -> list[TrainConfig]:
    """Full Cartesian product over the value sets, ascending in each field.

    Field order is batch_size, learning_rate, epochs, lora_r, lora_alpha;
    the last field varies fastest. Defaults to the published search
    ranges (270 configs).
    """
    if sets is None:
        sets = PAPER_GRID_SETS
    ordered = []
    for name in _GRID_FIELD_ORDER:
        values = sorted(set(sets.get(name, ())))
        if not values:
            raise ConfigError(name, "grid set must be non-empty")
        ordered.append(values)
    return [
        TrainConfig(batch_size=b, learning_rate=lr, epochs=e, lora_r=r, lora_alpha=a)
        for b, lr, e, r, a in itertools.product(*ordered)
    ]


def write_grid_file(configs: Sequence[TrainConfig], path: Path | str) -> int:
    with open(path, "w", encoding="utf-8") as handle:
        for config in configs:
            handle.write(canonical_dumps(config.to_json()) + "\n")
    return len(configs)
