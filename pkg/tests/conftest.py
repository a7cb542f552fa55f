import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


def pytest_runtest_logreport(report):
    """One explicit pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        verdict = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\n[ACCEPTANCE] {verdict}: {name}")

from casetutor.backends import MockBackend
from casetutor.decompose import CaseReport, KeywordSet
from casetutor.rerank import RankedEvidence
from casetutor.scholar import EvidenceItem
from casetutor.summarize import TextbookSummary
from casetutor.compose import assemble_context


@pytest.fixture
def mock_backend() -> MockBackend:
    return MockBackend()


@pytest.fixture
def sample_case() -> CaseReport:
    return CaseReport(
        case_id="case-001",
        full_text=(
            "FINDINGS: Focal consolidation in the right lower lobe is most "
            "consistent with pneumonia. There is a small right pleural effusion."
            "\n\nIMPRESSION: Right lower lobe pneumonia with small pleural effusion."
        ),
        impression="Right lower lobe pneumonia with small pleural effusion.",
        dataset_tag="test",
    )


def make_item(title: str, source: str = "pubmed", abstract: str = "A study.") -> EvidenceItem:
    return EvidenceItem(
        title=title,
        abstract=abstract,
        url=f"https://example.org/{abs(hash(title)) % 10**6}",
        source=source,
        external_id=str(abs(hash(title)) % 10**6),
    )


@pytest.fixture
def sample_bundle(sample_case):
    keywords = KeywordSet(case_id=sample_case.case_id, keywords=("pneumonia", "pleural effusion"))
    evidence = {
        kw: RankedEvidence(
            keyword=kw,
            items=((make_item(f"Imaging of {kw}"), 0.8), (make_item(f"{kw} review"), 0.5)),
            kept=(make_item(f"Imaging of {kw}"), make_item(f"{kw} review")),
        )
        for kw in keywords.keywords
    }
    summaries = {
        kw: TextbookSummary(keyword=kw, summary=f"Summary of {kw}.", source_page_ids=(1, 2))
        for kw in keywords.keywords
    }
    return assemble_context(sample_case, keywords, evidence, summaries)
