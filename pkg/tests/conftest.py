import json

import pytest

from qasynth.corpus import GoldQA, make_document
from qasynth.gateway import ChatGateway, GenerationParams, MockBackend, MockRule


@pytest.fixture
def gen_params():
    return GenerationParams(model_id="test-model")


@pytest.fixture
def make_corpus():
    """Factory for small deterministic corpora of ContextDocuments."""

    def build(n, source="wiki", prefix="doc", text_len=40):
        docs = []
        for i in range(n):
            # vary the text so prompts differ per document
            body = f"記事{i}。" + "これは本文です。" * (text_len // 8)
            docs.append(make_document(f"{prefix}-{i:04d}", source, body))
        return docs

    return build


@pytest.fixture
def make_gold():
    def build(n, context_prefix="doc"):
        return [
            GoldQA(
                context_id=f"{context_prefix}-{i:04d}",
                question=f"質問{i}は何ですか。",
                answers=(f"答え{i}です",),
                question_id=f"q-{i:04d}",
            )
            for i in range(n)
        ]

    return build


@pytest.fixture
def echo_gateway():
    """Gateway whose backend answers every prompt with one fixed QA object."""

    def build(question="首都はどこか", answer="東京", failures=(), **gw_kwargs):
        backend = MockBackend()
        backend.set_default(
            MockRule(
                response=json.dumps({"Question": question, "Answer": answer}, ensure_ascii=False),
                failures=tuple(failures),
            )
        )
        gw_kwargs.setdefault("sleep", lambda _: None)
        return ChatGateway(backend, **gw_kwargs), backend

    return build
