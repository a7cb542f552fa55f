"""Wiring shared by the CLI and the HTTP API: backends, retrieval, pool."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Awaitable, Callable

import httpx

from .backends import HttpBackend, MockBackend
from .config import RunConfig
from .decompose import CaseReport
from .engine import PipelineDeps, WorkerPool, build_pool
from .errors import IngestError
from .scholar import (
    EvidenceItem,
    FetchResult,
    PubMedClient,
    QueryCache,
    RateLimiter,
    SemanticScholarClient,
    hybrid_fetch,
)
from .textbook import VectorIndex, build_index, ingest_pages, load_index

FIXTURE_CASES = "fixture_cases.jsonl"
FIXTURE_PAGES = "fixture_pages.jsonl"


def data_path(name: str) -> Path:
    from importlib import resources

    return Path(str(resources.files("casetutor.data").joinpath(name)))


def load_cases(path: str | Path) -> list[CaseReport]:
    """Cases JSONL: {case_id, full_text, impression?, dataset_tag?}."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"cases file not found: {path}")
    cases: list[CaseReport] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                case = CaseReport(
                    case_id=str(obj["case_id"]),
                    full_text=str(obj["full_text"]),
                    impression=str(obj.get("impression", "")),
                    dataset_tag=str(obj.get("dataset_tag", "")),
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise IngestError(f"{path} line {lineno}: {exc}") from exc
            if case.case_id in seen:
                raise IngestError(f"{path} line {lineno}: duplicate case_id {case.case_id}")
            seen.add(case.case_id)
            cases.append(case)
    if not cases:
        raise IngestError(f"{path}: no cases found")
    return cases


def mock_evidence(keyword: str) -> list[EvidenceItem]:
    """Deterministic stand-in for live academic search in --mock runs."""
    digits = str(int(hashlib.sha256(keyword.encode("utf-8")).hexdigest()[:8], 16) % 10**8)
    return [
        EvidenceItem(
            title=f"Imaging of {keyword}: a pictorial review.",
            abstract=(
                f"This review summarizes the characteristic imaging findings of {keyword} "
                f"across modalities and outlines current diagnostic criteria."
            ),
            url=f"https://pubmed.ncbi.nlm.nih.gov/{digits}/",
            source="pubmed",
            external_id=digits,
            year=2023,
        ),
        EvidenceItem(
            title=f"{keyword}: current evidence and management.",
            abstract=(
                f"An evidence synthesis on {keyword}, covering epidemiology, imaging "
                f"work-up, and management pathways."
            ),
            url=f"https://www.semanticscholar.org/paper/mock-{digits}",
            source="semantic_scholar",
            external_id=f"mock-{digits}",
            year=2024,
        ),
    ]


async def mock_fetch(keyword: str) -> FetchResult:
    return FetchResult(keyword=keyword, items=mock_evidence(keyword))


@dataclass
class Runtime:
    """Live resources for a run; close() after use."""

    config: RunConfig
    pool: WorkerPool
    deps: PipelineDeps
    mock: bool
    _client: httpx.AsyncClient | None = None

    async def close(self) -> None:
        self.pool.shutdown()
        if self._client is not None:
            await self._client.aclose()


def build_runtime(
    config: RunConfig,
    mock: bool = False,
    index: VectorIndex | None = None,
) -> Runtime:
    """Assemble the worker pool, retrieval stack, and pipeline deps.

    With ``mock`` (or all-mock backend configs) no network is touched:
    generation/embedding/rerank share one MockBackend and academic search is
    synthesized deterministically.
    """
    config.validate()
    all_mock = mock or all(b.kind == "mock" for b in config.backends.values())
    gazetteer = None
    if config.paths.gazetteer:
        gazetteer = [
            line.strip()
            for line in Path(config.paths.gazetteer).read_text("utf-8").splitlines()
            if line.strip()
        ]
    shared_mock = MockBackend(gazetteer=gazetteer) if all_mock else None

    def backend(service: str):
        if shared_mock is not None:
            return shared_mock
        cfg = config.backends[service]
        return MockBackend(gazetteer=gazetteer) if cfg.kind == "mock" else HttpBackend(cfg)

    gen = backend("generation")
    emb = backend("embedding")
    rr = backend("rerank")
    pool = build_pool(gen, emb, rr).start()

    if index is None:
        if config.paths.index:
            pages = ingest_pages(config.paths.pages) if config.paths.pages else None
            index = load_index(config.paths.index, pages)
        else:
            pages_path = Path(config.paths.pages) if config.paths.pages else data_path(FIXTURE_PAGES)
            index = build_index(ingest_pages(pages_path), emb, corpus_ref=str(pages_path.name))

    client: httpx.AsyncClient | None = None
    if all_mock:
        fetcher: Callable[[str], Awaitable[FetchResult]] = mock_fetch
    else:
        client = httpx.AsyncClient(timeout=30.0)
        cache = QueryCache(config.retrieval.cache_dir)
        pubmed = PubMedClient(client, RateLimiter(max_concurrent=3, min_interval_ms=120))
        s2 = SemanticScholarClient(client, RateLimiter(max_concurrent=3, min_interval_ms=120))

        async def fetcher(keyword: str) -> FetchResult:
            return await hybrid_fetch(
                keyword, pubmed, s2, cache, config.retrieval.limit_per_source
            )

    deps = PipelineDeps(
        pool=pool,
        fetcher=fetcher,
        index=index,
        k_local=config.retrieval.k_local,
        keep_n=config.retrieval.keep_n,
        char_budget=config.engine.char_budget,
        max_cases_in_flight=config.engine.max_cases_in_flight,
    )
    return Runtime(config=config, pool=pool, deps=deps, mock=all_mock, _client=client)
