"""casetutor: evidence-grounded learning modules from clinical case reports.

Pipeline: keyword decomposition -> hybrid retrieval (local textbook index in
parallel with academic search APIs) -> per-keyword summarization and evidence
reranking -> two cross-case generation batches (educational material, MCQs)
-> structured parsing. An evaluation toolkit covers rater agreement statistics
and an LLM-as-judge harness.
"""

__version__ = "0.1.0"

from .compose import ContextBundle, LearningModule, Mcq
from .decompose import CaseReport, KeywordSet
from .engine import PipelineDeps, WorkerPool, build_pool, run_pipeline
from .errors import CaseTutorError
from .evalkit import AgreementReport, RatingTable, agreement_report
from .scholar import EvidenceItem
from .summarize import TextbookSummary
from .textbook import TextbookHit, TextbookPage, VectorIndex

__all__ = [
    "__version__",
    "AgreementReport",
    "CaseReport",
    "CaseTutorError",
    "ContextBundle",
    "EvidenceItem",
    "KeywordSet",
    "LearningModule",
    "Mcq",
    "PipelineDeps",
    "RatingTable",
    "TextbookHit",
    "TextbookPage",
    "TextbookSummary",
    "VectorIndex",
    "WorkerPool",
    "agreement_report",
    "build_pool",
    "run_pipeline",
]
