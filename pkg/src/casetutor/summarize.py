"""Query-focused summarization of retrieved textbook pages."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import prompts
from .backends import GenerationBackend, Prompt
from .errors import CaseTutorError
from .textbook import TextbookHit


@dataclass(frozen=True)
class TextbookSummary:
    keyword: str
    summary: str
    source_page_ids: tuple[int, ...]


class EmptySummaryError(CaseTutorError):
    """The model returned a blank summary."""


def pages_block(hits: Sequence[TextbookHit]) -> str:
    """Pages in rank order, each under a "[Page N]" header."""
    return "\n\n".join(f"[Page {h.page_id}]\n{h.text}" for h in hits)


def build_summary_prompt(keyword: str, hits: Sequence[TextbookHit]) -> Prompt:
    if not hits:
        raise ValueError("summarization requires at least one textbook hit")
    user = prompts.render(
        prompts.SUMMARY_USER,
        keyword=keyword,
        pages_block_text=pages_block(hits),
    )
    return Prompt(system=prompts.SUMMARY_SYSTEM, user=user)


def summarize_textbook(
    keyword: str,
    hits: Sequence[TextbookHit],
    gen: GenerationBackend,
) -> TextbookSummary:
    completion = gen.generate(build_summary_prompt(keyword, hits)).strip()
    if not completion:
        raise EmptySummaryError(f"blank summary for keyword {keyword!r}")
    return TextbookSummary(
        keyword=keyword,
        summary=completion,
        source_page_ids=tuple(h.page_id for h in hits),
    )
