import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casetutor.backends import MockBackend
from casetutor.errors import ProtocolError
from casetutor.rerank import (
    RankedEvidence,
    build_rerank_query,
    rerank_evidence,
    scoring_text,
)
from conftest import make_item


class FixedScores:
    def __init__(self, scores):
        self.scores = scores

    def rerank_scores(self, query, documents):
        return list(self.scores)


def test_build_rerank_query_layout(sample_case):
    q = build_rerank_query(sample_case, "pneumonia")
    assert q == f"pneumonia\n\n{sample_case.full_text}"


def test_build_rerank_query_requires_keyword(sample_case):
    with pytest.raises(ValueError):
        build_rerank_query(sample_case, "")


def test_scoring_text_is_title_newline_abstract():
    item = make_item("A title", abstract="An abstract.")
    assert scoring_text(item) == "A title\nAn abstract."


def test_sorts_descending_keeps_top_n():
    items = [make_item(f"t{i}") for i in range(4)]
    ranked = rerank_evidence(items, "q", FixedScores([0.1, 0.9, 0.5, 0.7]), keep_n=2, keyword="k")
    assert [it.title for it, _ in ranked.items] == ["t1", "t3", "t2", "t0"]
    assert [it.title for it in ranked.kept] == ["t1", "t3"]
    assert ranked.keyword == "k"


def test_ties_keep_original_order():
    items = [make_item(f"t{i}") for i in range(3)]
    ranked = rerank_evidence(items, "q", FixedScores([0.5, 0.5, 0.5]))
    assert [it.title for it, _ in ranked.items] == ["t0", "t1", "t2"]


def test_empty_candidates_short_circuit():
    ranked = rerank_evidence([], "q", FixedScores([]), keyword="k")
    assert ranked == RankedEvidence(keyword="k", items=(), kept=())


def test_score_count_mismatch_is_protocol_error():
    items = [make_item("a"), make_item("b")]
    with pytest.raises(ProtocolError):
        rerank_evidence(items, "q", FixedScores([0.5]))


def test_keep_n_validation():
    with pytest.raises(ValueError):
        rerank_evidence([make_item("a")], "q", FixedScores([1.0]), keep_n=0)


def test_mock_backend_scores_by_token_overlap():
    relevant = make_item("acute appendicitis imaging", abstract="appendix ct findings")
    unrelated = make_item("galaxy cluster dynamics", abstract="dark matter halos")
    ranked = rerank_evidence(
        [unrelated, relevant], "acute appendicitis on ct imaging", MockBackend(), keep_n=1
    )
    assert ranked.kept[0] == relevant


@given(
    st.lists(st.floats(min_value=0, max_value=1, allow_nan=False), min_size=1, max_size=10),
    st.integers(min_value=1, max_value=10),
)
@settings(max_examples=60)
def test_kept_is_prefix_of_sorted_items(scores, keep_n):
    items = [make_item(f"title {i}") for i in range(len(scores))]
    ranked = rerank_evidence(items, "q", FixedScores(scores), keep_n=keep_n)
    ordered = [it for it, _ in ranked.items]
    assert list(ranked.kept) == ordered[: min(keep_n, len(items))]
    ranked_scores = [s for _, s in ranked.items]
    assert ranked_scores == sorted(ranked_scores, reverse=True)
