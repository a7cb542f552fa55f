import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casetutor.decompose import (
    MAX_KEYWORDS,
    CaseReport,
    KeywordSet,
    build_keyword_prompt,
    decompose_case,
    extract_impression,
    parse_keywords,
)
from casetutor.errors import ExtractionError, SchemaError


class TestCaseReport:
    def test_rejects_empty_fields(self):
        with pytest.raises(ValueError):
            CaseReport(case_id="", full_text="x")
        with pytest.raises(ValueError):
            CaseReport(case_id="c", full_text="")


class TestKeywordSet:
    def test_rejects_case_insensitive_duplicates(self):
        with pytest.raises(ValueError):
            KeywordSet(case_id="c", keywords=("Pneumonia", "pneumonia"))

    def test_empty_property(self):
        assert KeywordSet(case_id="c").empty
        assert not KeywordSet(case_id="c", keywords=("x",)).empty


class TestExtractImpression:
    def test_takes_text_after_last_marker(self):
        text = "IMPRESSION: preliminary.\nFINDINGS: stuff.\nIMPRESSION: final read."
        assert extract_impression(text) == "final read."

    def test_absent_marker(self):
        assert extract_impression("FINDINGS: nothing.") == ""

    def test_case_insensitive(self):
        assert extract_impression("Impression: pneumonia.") == "pneumonia."


class TestBuildKeywordPrompt:
    def test_fields_substituted(self, sample_case):
        prompt = build_keyword_prompt(sample_case)
        assert f"Final_report: {sample_case.full_text}" in prompt.user
        assert f"Impression: {sample_case.impression}" in prompt.user

    def test_impression_derived_when_absent(self):
        case = CaseReport(case_id="c", full_text="FINDINGS: x.\n\nIMPRESSION: pneumonia.")
        assert "Impression: pneumonia." in build_keyword_prompt(case).user

    def test_json_example_braces_survive_rendering(self, sample_case):
        prompt = build_keyword_prompt(sample_case)
        assert '{ "keywords": ["diagnosis 1", "diagnosis 2", "diagnosis 3"] }' in prompt.system


class TestParseKeywords:
    def test_plain_object(self):
        ks = parse_keywords('{"keywords": ["a", "b"]}', "c")
        assert ks.keywords == ("a", "b")

    def test_fenced_with_prose(self):
        completion = 'Sure!\n```json\n{"keywords": ["pneumonia"]}\n```\nDone.'
        assert parse_keywords(completion, "c").keywords == ("pneumonia",)

    def test_dedup_case_insensitive_keeps_first(self):
        ks = parse_keywords('{"keywords": ["Pneumonia", " pneumonia ", "TB"]}', "c")
        assert ks.keywords == ("Pneumonia", "TB")

    def test_cap_at_max_keywords(self):
        many = [f"kw{i}" for i in range(MAX_KEYWORDS + 3)]
        ks = parse_keywords(json.dumps({"keywords": many}), "c")
        assert ks.keywords == tuple(many[:MAX_KEYWORDS])

    def test_empty_list_allowed(self):
        assert parse_keywords('{"keywords": []}', "c").empty

    def test_wrong_type_is_schema_error(self):
        with pytest.raises(SchemaError):
            parse_keywords('{"keywords": "pneumonia"}', "c")
        with pytest.raises(SchemaError):
            parse_keywords('{"keywords": [1, 2]}', "c")

    def test_no_object_is_extraction_error(self):
        with pytest.raises(ExtractionError):
            parse_keywords("no json here", "c")
        with pytest.raises(ExtractionError):
            parse_keywords("", "c")

    def test_skips_unrelated_objects(self):
        completion = '{"notes": 1} then {"keywords": ["x"]}'
        assert parse_keywords(completion, "c").keywords == ("x",)

    def test_nested_braces_in_strings(self):
        completion = '{"keywords": ["a {weird} one"]}'
        assert parse_keywords(completion, "c").keywords == ("a {weird} one",)

    @given(
        st.lists(
            st.text(
                alphabet=st.characters(whitelist_categories=("Ll",), max_codepoint=0x7F),
                min_size=1,
                max_size=12,
            ),
            max_size=MAX_KEYWORDS,
        )
    )
    @settings(max_examples=60)
    def test_roundtrip_through_json(self, keywords):
        parsed = parse_keywords(json.dumps({"keywords": keywords}), "c")
        expected = []
        seen = set()
        for kw in keywords:
            k = kw.strip()
            if k and k.lower() not in seen:
                seen.add(k.lower())
                expected.append(k)
        assert list(parsed.keywords) == expected


def test_decompose_case_with_mock(mock_backend, sample_case):
    ks = decompose_case(sample_case, mock_backend)
    assert ks.case_id == sample_case.case_id
    assert ks.keywords == ("pneumonia", "pleural effusion")
