"""Final stage: context assembly, generation prompts, output parsing."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import prompts
from .backends import Prompt
from .decompose import CaseReport, KeywordSet
from .errors import ExtractionError
from .rerank import RankedEvidence
from .scholar import EvidenceItem
from .summarize import TextbookSummary

log = logging.getLogger(__name__)

ABSTRACT_DISPLAY_CHARS = 1_500
DEFAULT_CHAR_BUDGET = 48_000
OMITTED = "… (Omitted)"
NO_EVIDENCE = "No academic evidence retrieved."
NO_SUMMARY = "No textbook summary available."


@dataclass(frozen=True)
class ContextBundle:
    """Everything the generation prompts need for one case."""

    report: CaseReport
    keywords: KeywordSet
    evidence: dict[str, RankedEvidence]
    summaries: dict[str, TextbookSummary | None]

    def __post_init__(self) -> None:
        for kw in self.keywords.keywords:
            if kw not in self.evidence or kw not in self.summaries:
                raise ValueError(f"bundle missing entry for keyword {kw!r}")


@dataclass(frozen=True)
class Mcq:
    keyword: str
    stem: str
    options: tuple[str, str, str, str]
    answer: str
    explanation: str

    def __post_init__(self) -> None:
        if not self.stem:
            raise ValueError("stem must be non-empty")
        if len(self.options) != 4 or not all(self.options):
            raise ValueError("exactly four non-empty options required")
        if self.answer not in ("A", "B", "C", "D"):
            raise ValueError(f"answer must be A-D, got {self.answer!r}")

    def to_dict(self) -> dict:
        return {
            "keyword": self.keyword,
            "stem": self.stem,
            "options": list(self.options),
            "answer": self.answer,
            "explanation": self.explanation,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Mcq":
        return cls(
            keyword=obj.get("keyword", ""),
            stem=obj["stem"],
            options=tuple(obj["options"]),
            answer=obj["answer"],
            explanation=obj.get("explanation", ""),
        )


@dataclass
class LearningModule:
    """The final per-case artifact."""

    case_id: str
    keywords: list[str]
    kept_evidence: list[EvidenceItem]
    summaries: list[TextbookSummary]
    education_text: str
    education_sections: dict[str, str]
    mcqs: list[Mcq]
    timings: dict[str, float] = field(default_factory=dict)
    dataset_tag: str = ""
    status: str = "ok"

    def to_dict(self, include_timings: bool = False) -> dict:
        return {
            "case_id": self.case_id,
            "dataset_tag": self.dataset_tag,
            "keywords": list(self.keywords),
            "evidence": [e.to_dict() for e in self.kept_evidence],
            "summaries": [
                {
                    "keyword": s.keyword,
                    "summary": s.summary,
                    "source_page_ids": list(s.source_page_ids),
                }
                for s in self.summaries
            ],
            "education_text": self.education_text,
            "education_sections": dict(self.education_sections),
            "mcqs": [m.to_dict() for m in self.mcqs],
            "timings": {k: round(v, 3) for k, v in self.timings.items()} if include_timings else {},
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "LearningModule":
        return cls(
            case_id=obj["case_id"],
            dataset_tag=obj.get("dataset_tag", ""),
            keywords=list(obj["keywords"]),
            kept_evidence=[EvidenceItem.from_dict(e) for e in obj.get("evidence", [])],
            summaries=[
                TextbookSummary(
                    keyword=s["keyword"],
                    summary=s["summary"],
                    source_page_ids=tuple(s.get("source_page_ids", ())),
                )
                for s in obj.get("summaries", [])
            ],
            education_text=obj.get("education_text", ""),
            education_sections=dict(obj.get("education_sections", {})),
            mcqs=[Mcq.from_dict(m) for m in obj.get("mcqs", [])],
            timings=dict(obj.get("timings", {})),
            status=obj.get("status", "ok"),
        )


def assemble_context(
    report: CaseReport,
    keywords: KeywordSet,
    evidence: Mapping[str, RankedEvidence],
    summaries: Mapping[str, TextbookSummary | None],
) -> ContextBundle:
    """Complete the maps with explicit empty markers; reject cross-case input."""
    if keywords.case_id != report.case_id:
        raise ValueError(
            f"case_id mismatch: report {report.case_id!r} vs keywords {keywords.case_id!r}"
        )
    ev: dict[str, RankedEvidence] = {}
    su: dict[str, TextbookSummary | None] = {}
    for kw in keywords.keywords:
        ev[kw] = evidence.get(kw) or RankedEvidence(keyword=kw, items=(), kept=())
        su[kw] = summaries.get(kw)
    return ContextBundle(report=report, keywords=keywords, evidence=ev, summaries=su)


def _display_abstract(abstract: str, limit: int = ABSTRACT_DISPLAY_CHARS) -> str:
    if not abstract:
        return "No Abstract"
    if len(abstract) > limit:
        return abstract[:limit].rstrip() + OMITTED
    return abstract


def evidence_block(bundle: ContextBundle, abstract_cut: dict[tuple[str, int], int] | None = None) -> str:
    """Per-keyword context: kept papers then the textbook summary.

    ``abstract_cut`` optionally overrides the display length of individual
    abstracts, keyed by (keyword, paper position); used by budget trimming.
    """
    parts: list[str] = []
    for kw in bundle.keywords.keywords:
        lines = [f"#### Keyword: {kw}", ""]
        ranked = bundle.evidence[kw]
        if not ranked.kept:
            lines.append(NO_EVIDENCE)
            lines.append("")
        else:
            for i, item in enumerate(ranked.kept, start=1):
                limit = ABSTRACT_DISPLAY_CHARS
                if abstract_cut is not None:
                    limit = abstract_cut.get((kw, i), limit)
                lines.append(f"Paper {i}: {item.title}")
                lines.append(_display_abstract(item.abstract, limit) if limit > 0 else OMITTED)
                lines.append(f"URL: {item.url} | Source: {item.source}")
                lines.append("")
        summary = bundle.summaries[kw]
        lines.append("Textbook Summary:")
        lines.append(summary.summary if summary is not None else NO_SUMMARY)
        parts.append("\n".join(lines))
    return "\n\n".join(parts)


def _fit_to_budget(render_fn, bundle: ContextBundle, char_budget: int) -> str:
    """Shrink abstracts last-first until the rendered prompt fits the budget.

    The report text is never truncated; if the prompt still overflows with
    every abstract omitted, the overflow is accepted and logged.
    """
    text = render_fn(None)
    if len(text) <= char_budget:
        return text
    cut: dict[tuple[str, int], int] = {}
    slots = [
        (kw, i)
        for kw in bundle.keywords.keywords
        for i in range(1, len(bundle.evidence[kw].kept) + 1)
    ]
    for slot in reversed(slots):
        cut[slot] = 0
        text = render_fn(cut)
        if len(text) <= char_budget:
            return text
    log.warning(
        "case %s: prompt still exceeds %d chars with all abstracts omitted",
        bundle.report.case_id,
        char_budget,
    )
    return text


def build_education_prompt(bundle: ContextBundle, char_budget: int = DEFAULT_CHAR_BUDGET) -> Prompt:
    if bundle.keywords.empty:
        raise ValueError("education prompt requires at least one keyword")

    def render_user(cut):
        return prompts.render(
            prompts.EDUCATION_USER,
            keywords_list_str=prompts.keyword_list_block(list(bundle.keywords.keywords)),
            original_reviewer_report=bundle.report.full_text,
            user_block_for_final_stages=evidence_block(bundle, cut),
        )

    return Prompt(system=prompts.EDUCATION_SYSTEM, user=_fit_to_budget(render_user, bundle, char_budget))


def build_mcq_prompt(bundle: ContextBundle, char_budget: int = DEFAULT_CHAR_BUDGET) -> Prompt:
    if bundle.keywords.empty:
        raise ValueError("MCQ prompt requires at least one keyword")

    def render_user(cut):
        return prompts.render(
            prompts.MCQ_USER,
            keywords_list_str=prompts.keyword_list_block(list(bundle.keywords.keywords)),
            mcq_input_context=evidence_block(bundle, cut),
        )

    return Prompt(system=prompts.MCQ_SYSTEM, user=_fit_to_budget(render_user, bundle, char_budget))


_KW_HEADER_RE = re.compile(r"^\s*#{1,6}\s+(?P<title>.+?)\s*$")
_BOLD_HEADER_RE = re.compile(r"^\s*\*\*(?P<title>.+?)\*\*\s*$")
_OPTION_RE = re.compile(r"^\s*[-*•]?\s*(?P<letter>[A-D])[.)]\s+(?P<text>.+?)\s*$")
_ANSWER_RE = re.compile(
    r"^\s*\*{0,2}Answer\s*\*{0,2}\s*[:：]\s*\*{0,2}\s*(?P<letter>[A-D])\*{0,2}\b"
)
_EXPLANATION_RE = re.compile(
    r"^\s*\*{0,2}Explanation\s*\*{0,2}\s*[:：]\s*\*{0,2}\s*(?P<text>.*)$"
)
_QNUM_RE = re.compile(r"^\s*(?:Q(?:uestion)?\s*\d+|Assessment Question\s*\d+)\s*[.):]?\s*", re.IGNORECASE)
_NOT_A_KEYWORD_RE = re.compile(r"(?i)\b(question|answer|explanation|multiple choice)\b")


def _strip_emphasis(text: str) -> str:
    return text.strip().strip("*_").strip()


def parse_mcqs(completion: str) -> list[Mcq]:
    """Recover well-formed questions from a generation, skipping broken blocks.

    Tolerates leading/trailing prose, "####" or bold keyword headers, bulleted
    options, and stems with or without a "Qn." prefix.
    """
    if not completion:
        raise ExtractionError("empty completion", completion)
    lines = completion.splitlines()
    mcqs: list[Mcq] = []
    keyword = ""
    last_text_line = ""
    i = 0
    n = len(lines)
    while i < n:
        line = lines[i]
        header = _KW_HEADER_RE.match(line) or _BOLD_HEADER_RE.match(line)
        if header and not _NOT_A_KEYWORD_RE.search(header.group("title")):
            keyword = _strip_emphasis(header.group("title"))
            last_text_line = ""
            i += 1
            continue
        opt = _OPTION_RE.match(line)
        if opt and opt.group("letter") == "A":
            block_ok, consumed, mcq = _parse_question_block(lines, i, keyword, last_text_line)
            if block_ok:
                mcqs.append(mcq)
            else:
                log.debug("skipping malformed MCQ block at line %d", i + 1)
            i += max(consumed, 1)
            last_text_line = ""
            continue
        stripped = line.strip()
        if stripped and not _ANSWER_RE.match(line) and not _EXPLANATION_RE.match(line):
            qn = _QNUM_RE.match(stripped)
            candidate = stripped[qn.end():].strip() if qn else stripped
            if candidate:
                last_text_line = _strip_emphasis(candidate)
            elif qn:
                last_text_line = ""  # bare "Assessment Question 1" header; stem follows
        i += 1
    if not mcqs:
        raise ExtractionError("no well-formed multiple-choice questions found", completion)
    return mcqs


def _parse_question_block(lines: list[str], start: int, keyword: str, stem: str):
    """Parse options A-D, Answer, Explanation starting at the 'A.' line."""
    options: dict[str, str] = {}
    i = start
    expected = "ABCD"
    for letter in expected:
        if i < len(lines):
            m = _OPTION_RE.match(lines[i])
            if m and m.group("letter") == letter:
                options[letter] = m.group("text")
                i += 1
                continue
        break
    answer = ""
    explanation = ""
    while i < len(lines):
        line = lines[i]
        if _OPTION_RE.match(line) and _OPTION_RE.match(line).group("letter") == "A":
            break
        if not line.strip():
            i += 1
            continue
        am = _ANSWER_RE.match(line)
        if am:
            answer = am.group("letter")
            i += 1
            continue
        em = _EXPLANATION_RE.match(line)
        if em:
            explanation = em.group("text").strip()
            i += 1
            while i < len(lines) and lines[i].strip() and not _OPTION_RE.match(lines[i]):
                if _KW_HEADER_RE.match(lines[i]) or _QNUM_RE.match(lines[i].strip()):
                    break
                explanation += " " + lines[i].strip()
                i += 1
            break
        if answer:
            break
        if _KW_HEADER_RE.match(line) or _BOLD_HEADER_RE.match(line) or _QNUM_RE.match(line.strip()):
            break  # new section reached without an Answer; give up on this block
        i += 1
    consumed = i - start
    if len(options) != 4 or not answer or not stem:
        return False, consumed, None
    try:
        mcq = Mcq(
            keyword=keyword,
            stem=stem,
            options=(options["A"], options["B"], options["C"], options["D"]),
            answer=answer,
            explanation=explanation,
        )
    except ValueError:
        return False, consumed, None
    return True, consumed, mcq


def render_mcqs(mcqs: Sequence[Mcq]) -> str:
    """Render questions back into the generation scaffold (round-trip aid)."""
    parts = ["### Multiple Choice Questions"]
    current_kw: str | None = None
    qnum = 0
    for mcq in mcqs:
        if mcq.keyword != current_kw:
            current_kw = mcq.keyword
            qnum = 0
            if current_kw:
                parts.append(f"\n#### {current_kw}")
        qnum += 1
        parts.append(
            f"\nQ{qnum}. {mcq.stem}\n"
            f"A. {mcq.options[0]}\n"
            f"B. {mcq.options[1]}\n"
            f"C. {mcq.options[2]}\n"
            f"D. {mcq.options[3]}\n"
            f"Answer: {mcq.answer}\n"
            f"Explanation: {mcq.explanation}"
        )
    return "\n".join(parts)


def _normalize_header(line: str) -> str:
    text = line.strip()
    text = text.strip("*_")
    text = re.sub(r"^#{1,6}\s*", "", text)
    text = text.strip("*_ \t")
    text = text.rstrip(":").strip()
    return text.casefold()


def parse_education(completion: str, keywords: Sequence[str]) -> tuple[str, dict[str, str]]:
    """Best-effort split of the education text into per-keyword sections.

    The full completion is always retained; keywords without a detectable
    header map to empty sections.
    """
    sections: dict[str, str] = {kw: "" for kw in keywords}
    if not completion:
        return "", sections
    folded = {kw.casefold(): kw for kw in keywords}
    lines = completion.splitlines()
    current: str | None = None
    buf: list[str] = []

    def flush():
        if current is not None:
            sections[current] = "\n".join(buf).strip()

    for line in lines:
        norm = _normalize_header(line)
        if norm in folded:
            flush()
            current = folded[norm]
            buf = []
        elif current is not None:
            buf.append(line)
    flush()
    for kw in keywords:
        if not sections[kw]:
            log.debug("no section header detected for keyword %r", kw)
    return completion, sections
