"""Malformed-model-output corpus for the JSON repair ladder.

Each case records the raw model text, the requested pair count, and the
exact documented outcome: either the extracted (question, answer) pairs
or the error class. The parser must never raise anything else.
"""

import pytest

from qasynth.errors import QAParseError, QASchemaError
from qasynth.synthesis import parse_qa_output

OK = "ok"
PARSE = QAParseError
SCHEMA = QASchemaError

# (name, raw, expected_n, outcome, payload)
CASES = [
    # clean inputs
    ("plain_object", '{"Question": "Q1", "Answer": "A1"}', 1, OK, [("Q1", "A1")]),
    ("plain_array_n3", '[{"Question": "Q1", "Answer": "A1"}, {"Question": "Q2", "Answer": "A2"}, {"Question": "Q3", "Answer": "A3"}]', 3, OK, [("Q1", "A1"), ("Q2", "A2"), ("Q3", "A3")]),
    ("object_coerced_for_n3", '{"Question": "Q", "Answer": "A"}', 3, OK, [("Q", "A")]),
    ("array_for_n1", '[{"Question": "Q", "Answer": "A"}]', 1, OK, [("Q", "A")]),
    ("unicode_content", '{"Question": "首都は?", "Answer": "東京"}', 1, OK, [("首都は?", "東京")]),
    # case-insensitive keys
    ("lowercase_keys", '{"question": "Q", "answer": "A"}', 1, OK, [("Q", "A")]),
    ("upper_keys", '{"QUESTION": "Q", "ANSWER": "A"}', 1, OK, [("Q", "A")]),
    ("mixed_case_keys", '{"qUeStIoN": "Q", "aNsWeR": "A"}', 1, OK, [("Q", "A")]),
    # fenced code blocks
    ("json_fence", '```json\n{"Question": "Q", "Answer": "A"}\n```', 1, OK, [("Q", "A")]),
    ("bare_fence", '```\n{"Question": "Q", "Answer": "A"}\n```', 1, OK, [("Q", "A")]),
    ("fence_with_prose", 'Here you go:\n```json\n[{"Question": "Q", "Answer": "A"}]\n```\nHope that helps!', 1, OK, [("Q", "A")]),
    ("fence_windows_newlines", '```json\r\n{"Question": "Q", "Answer": "A"}\r\n```', 1, OK, [("Q", "A")]),
    # balanced-span extraction
    ("prose_preamble", 'Sure! The QA pair is {"Question": "Q", "Answer": "A"} as requested.', 1, OK, [("Q", "A")]),
    ("trailing_text", '{"Question": "Q", "Answer": "A"}\nLet me know if you need more.', 1, OK, [("Q", "A")]),
    ("array_in_prose", 'answer below\n[{"Question": "Q", "Answer": "A"}] done', 3, OK, [("Q", "A")]),
    ("braces_inside_strings", '{"Question": "What does {x} mean?", "Answer": "A {brace} test"}', 1, OK, [("What does {x} mean?", "A {brace} test")]),
    ("escaped_quotes", '{"Question": "He said \\"hi\\"", "Answer": "A"}', 1, OK, [('He said "hi"', "A")]),
    ("two_objects_first_wins", '{"Question": "Q1", "Answer": "A1"} {"Question": "Q2", "Answer": "A2"}', 1, OK, [("Q1", "A1")]),
    # arity
    ("over_arity_truncated", '[{"Question": "Q1", "Answer": "A1"}, {"Question": "Q2", "Answer": "A2"}]', 1, OK, [("Q1", "A1")]),
    ("under_arity_kept", '[{"Question": "Q1", "Answer": "A1"}]', 3, OK, [("Q1", "A1")]),
    # schema failures
    ("missing_answer", '{"Question": "Q"}', 1, SCHEMA, "Answer"),
    ("missing_question", '{"Answer": "A"}', 1, SCHEMA, "Question"),
    ("non_string_answer", '{"Question": "Q", "Answer": 42}', 1, SCHEMA, "int"),
    ("null_question", '{"Question": null, "Answer": "A"}', 1, SCHEMA, None),
    ("empty_array", "[]", 3, SCHEMA, None),
    ("array_of_strings", '["Q", "A"]', 1, SCHEMA, None),
    ("array_with_bad_item", '[{"Question": "Q", "Answer": "A"}, {"Question": "Q2"}]', 3, SCHEMA, None),
    # total parse failures
    ("plain_prose", "I cannot answer that question.", 1, PARSE, None),
    ("empty_string", "", 1, PARSE, None),
    ("truncated_json", '{"Question": "Q", "Answer": "A', 1, PARSE, None),
]


@pytest.mark.parametrize(
    "name,raw,expected_n,outcome,payload", CASES, ids=[c[0] for c in CASES]
)
def test_parser_case(name, raw, expected_n, outcome, payload):
    if outcome is OK:
        assert parse_qa_output(raw, expected_n) == payload
    else:
        with pytest.raises(outcome) as err:
            parse_qa_output(raw, expected_n)
        if isinstance(payload, str):
            assert payload in str(err.value)


def test_corpus_has_thirty_cases():
    assert len(CASES) == 30
    assert len({c[0] for c in CASES}) == 30


def test_parse_failure_carries_ladder_trace():
    with pytest.raises(QAParseError) as err:
        parse_qa_output("no json here at all", 1)
    assert err.value.ladder_trace  # every repair step is named
    assert len(err.value.ladder_trace) >= 2


def test_over_arity_warns(caplog):
    with caplog.at_level("WARNING"):
        parse_qa_output('[{"Question": "Q1", "Answer": "A1"}, {"Question": "Q2", "Answer": "A2"}]', 1)
    assert any("2" in r.message for r in caplog.records)


def test_expected_n_precondition():
    with pytest.raises(ValueError):
        parse_qa_output('{"Question": "Q", "Answer": "A"}', 0)
