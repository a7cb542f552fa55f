"""Evidence reranking: contextualized query, top-N selection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .backends import RerankBackend
from .decompose import CaseReport
from .errors import ProtocolError
from .scholar import EvidenceItem

DEFAULT_KEEP_N = 2


@dataclass(frozen=True)
class RankedEvidence:
    """Candidates scored and sorted; ``kept`` is the top slice fed to prompts."""

    keyword: str
    items: tuple[tuple[EvidenceItem, float], ...]
    kept: tuple[EvidenceItem, ...]


def build_rerank_query(report: CaseReport, keyword: str) -> str:
    """Keyword, blank line, full report text; byte-stable."""
    if not keyword:
        raise ValueError("keyword must be non-empty")
    return f"{keyword}\n\n{report.full_text}"


def scoring_text(item: EvidenceItem) -> str:
    return f"{item.title}\n{item.abstract}"


def rerank_evidence(
    candidates: Sequence[EvidenceItem],
    ctx_query: str,
    backend: RerankBackend,
    keep_n: int = DEFAULT_KEEP_N,
    keyword: str = "",
) -> RankedEvidence:
    """Score title+abstract against the query; sort descending, stable on ties."""
    if keep_n < 1:
        raise ValueError("keep_n must be >= 1")
    if not candidates:
        return RankedEvidence(keyword=keyword, items=(), kept=())
    scores = backend.rerank_scores(ctx_query, [scoring_text(c) for c in candidates])
    if len(scores) != len(candidates):
        raise ProtocolError(
            f"rerank returned {len(scores)} scores for {len(candidates)} documents"
        )
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], i))
    ranked = tuple((candidates[i], float(scores[i])) for i in order)
    kept = tuple(item for item, _ in ranked[: min(keep_n, len(ranked))])
    return RankedEvidence(keyword=keyword, items=ranked, kept=kept)
