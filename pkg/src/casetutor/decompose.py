"""Stage 1: turn a case report into retrieval keywords."""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

from . import prompts
from .backends import GenerationBackend, Prompt
from .errors import ExtractionError, SchemaError

log = logging.getLogger(__name__)

MAX_KEYWORDS = 8


@dataclass(frozen=True)
class CaseReport:
    """A source clinical report; the pipeline's unit of work."""

    case_id: str
    full_text: str
    impression: str = ""
    dataset_tag: str = ""

    def __post_init__(self) -> None:
        if not self.case_id:
            raise ValueError("case_id must be non-empty")
        if not self.full_text:
            raise ValueError("full_text must be non-empty")


@dataclass(frozen=True)
class KeywordSet:
    """Ordered, deduplicated keywords extracted for one case."""

    case_id: str
    keywords: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        seen = set()
        for kw in self.keywords:
            if not kw:
                raise ValueError("keywords must be non-empty")
            folded = kw.strip().lower()
            if folded in seen:
                raise ValueError(f"duplicate keyword {kw!r}")
            seen.add(folded)

    @property
    def empty(self) -> bool:
        return len(self.keywords) == 0


_IMPRESSION_RE = re.compile(r"impression\s*:?", re.IGNORECASE)


def extract_impression(full_text: str) -> str:
    """Text after the last 'IMPRESSION' marker, or empty when absent."""
    matches = list(_IMPRESSION_RE.finditer(full_text))
    if not matches:
        return ""
    return full_text[matches[-1].end():].strip()


def build_keyword_prompt(report: CaseReport) -> Prompt:
    impression = report.impression or extract_impression(report.full_text)
    user = prompts.render(
        prompts.KEYWORD_USER,
        full_report_text=report.full_text,
        impression_text=impression,
    )
    return Prompt(system=prompts.KEYWORD_SYSTEM, user=user)


def _balanced_objects(text: str):
    """Yield every balanced top-level JSON object substring, left to right."""
    i = 0
    n = len(text)
    while i < n:
        if text[i] != "{":
            i += 1
            continue
        depth = 0
        in_string = False
        escaped = False
        for j in range(i, n):
            ch = text[j]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
            elif ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    yield text[i : j + 1]
                    i = j
                    break
        i += 1


def parse_keywords(completion: str, case_id: str) -> KeywordSet:
    """Locate the first JSON object with a "keywords" string array.

    Surrounding prose and code fences are ignored. Keywords are trimmed and
    deduplicated case-insensitively, keeping the first occurrence; at most
    MAX_KEYWORDS are retained.
    """
    if not completion:
        raise ExtractionError("empty completion", completion)
    schema_error: SchemaError | None = None
    for candidate in _balanced_objects(completion):
        try:
            obj = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if not isinstance(obj, dict) or "keywords" not in obj:
            continue
        raw = obj["keywords"]
        if not isinstance(raw, list) or not all(isinstance(k, str) for k in raw):
            schema_error = SchemaError('"keywords" must be an array of strings')
            continue
        seen: set[str] = set()
        kept: list[str] = []
        for kw in raw:
            kw = kw.strip()
            if not kw or kw.lower() in seen:
                continue
            seen.add(kw.lower())
            kept.append(kw)
        if len(kept) > MAX_KEYWORDS:
            log.warning(
                "case %s: dropping %d keywords beyond cap of %d",
                case_id,
                len(kept) - MAX_KEYWORDS,
                MAX_KEYWORDS,
            )
            kept = kept[:MAX_KEYWORDS]
        return KeywordSet(case_id=case_id, keywords=tuple(kept))
    if schema_error is not None:
        raise schema_error
    raise ExtractionError("no parsable keywords object in completion", completion)


def decompose_case(report: CaseReport, gen: GenerationBackend) -> KeywordSet:
    completion = gen.generate(build_keyword_prompt(report))
    return parse_keywords(completion, report.case_id)
