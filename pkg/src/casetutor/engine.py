"""Orchestrator: worker pool with correlation IDs, per-case stage graph,
and cross-case two-batch generation."""
from __future__ import annotations

import asyncio
import concurrent.futures
import itertools
import logging
import queue
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Any, Awaitable, Callable, Sequence

import numpy as np

from .backends import (
    EmbeddingBackend,
    GenerationBackend,
    Prompt,
    RerankBackend,
)
from .compose import (
    ContextBundle,
    LearningModule,
    assemble_context,
    build_education_prompt,
    build_mcq_prompt,
    parse_education,
    parse_mcqs,
)
from .decompose import CaseReport, KeywordSet, build_keyword_prompt, parse_keywords
from .errors import CaseTutorError, PoolShutdownError
from .rerank import RankedEvidence, build_rerank_query, rerank_evidence
from .scholar import FetchResult
from .summarize import TextbookSummary, build_summary_prompt
from .textbook import TextbookHit, VectorIndex, search_by_vector

log = logging.getLogger(__name__)

STAGES = (
    "decompose",
    "retrieve_local",
    "retrieve_api",
    "summarize",
    "rerank",
    "compose",
    "generate",
    "parse",
)

DEFAULT_MAX_CASES_IN_FLIGHT = 16


# ---------------------------------------------------------------------------
# Worker pool
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WorkRequest:
    request_id: str
    service: str
    payload: Any


@dataclass(frozen=True)
class WorkResponse:
    request_id: str
    payload: Any = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


class WorkerFailure(CaseTutorError):
    """A worker reported a failure for one request."""


_SHUTDOWN = object()


class WorkerPool:
    """Logical service workers joined to callers by correlation-ID queues.

    Each service has its own request queue and worker threads; all responses
    flow through one response queue drained by a listener thread, which
    resolves the pending future matching the response's request_id.
    """

    def __init__(
        self,
        handlers: dict[str, Callable[[Any], Any]],
        workers_per_service: int = 1,
    ):
        self._handlers = dict(handlers)
        self._queues: dict[str, queue.Queue] = {s: queue.Queue() for s in handlers}
        self._responses: queue.Queue = queue.Queue()
        self._pending: dict[str, concurrent.futures.Future] = {}
        self._pending_lock = threading.Lock()
        self._threads: list[threading.Thread] = []
        self._running = False
        self._workers_per_service = workers_per_service
        self.dispatch_counts: dict[str, int] = {s: 0 for s in handlers}
        self.dispatch_windows: dict[str, list[tuple[float, float]]] = {s: [] for s in handlers}

    def start(self) -> "WorkerPool":
        if self._running:
            return self
        self._running = True
        for service in self._handlers:
            for i in range(self._workers_per_service):
                t = threading.Thread(
                    target=self._worker_loop,
                    args=(service,),
                    name=f"worker-{service}-{i}",
                    daemon=True,
                )
                t.start()
                self._threads.append(t)
        listener = threading.Thread(target=self._listener_loop, name="pool-listener", daemon=True)
        listener.start()
        self._threads.append(listener)
        return self

    def _worker_loop(self, service: str) -> None:
        handler = self._handlers[service]
        q = self._queues[service]
        while True:
            req = q.get()
            if req is _SHUTDOWN:
                return
            started = time.monotonic()
            try:
                result = handler(req.payload)
                resp = WorkResponse(request_id=req.request_id, payload=result)
            except Exception as exc:  # noqa: BLE001 - failures cross the queue as data
                resp = WorkResponse(request_id=req.request_id, error=f"{type(exc).__name__}: {exc}")
            self.dispatch_windows[service].append((started, time.monotonic()))
            self._responses.put(resp)

    def _listener_loop(self) -> None:
        while True:
            resp = self._responses.get()
            if resp is _SHUTDOWN:
                return
            with self._pending_lock:
                fut = self._pending.pop(resp.request_id, None)
            if fut is None:
                log.error("response for unknown request_id %s dropped", resp.request_id)
                continue
            if resp.ok:
                fut.set_result(resp.payload)
            else:
                fut.set_exception(WorkerFailure(resp.error))

    def dispatch(self, service: str, payload: Any) -> concurrent.futures.Future:
        if not self._running:
            raise PoolShutdownError("worker pool is not running")
        if service not in self._handlers:
            raise KeyError(f"no worker registered for service {service!r}")
        request_id = uuid.uuid4().hex
        fut: concurrent.futures.Future = concurrent.futures.Future()
        with self._pending_lock:
            self._pending[request_id] = fut
            self.dispatch_counts[service] += 1
        self._queues[service].put(WorkRequest(request_id=request_id, service=service, payload=payload))
        return fut

    async def adispatch(self, service: str, payload: Any) -> Any:
        return await asyncio.wrap_future(self.dispatch(service, payload))

    def pending_count(self) -> int:
        with self._pending_lock:
            return len(self._pending)

    def shutdown(self) -> None:
        if not self._running:
            return
        self._running = False
        for service, q in self._queues.items():
            for _ in range(self._workers_per_service):
                q.put(_SHUTDOWN)
        for t in self._threads:
            if t.name != "pool-listener":
                t.join(timeout=10)
        self._responses.put(_SHUTDOWN)
        for t in self._threads:
            if t.name == "pool-listener":
                t.join(timeout=10)
        with self._pending_lock:
            leftovers = list(self._pending.items())
            self._pending.clear()
        for _, fut in leftovers:
            if not fut.done():
                fut.set_exception(PoolShutdownError("pool shut down with request pending"))
        self._threads.clear()

    def __enter__(self) -> "WorkerPool":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.shutdown()


def build_pool(
    gen: GenerationBackend,
    embedder: EmbeddingBackend,
    reranker: RerankBackend,
    workers_per_service: int = 1,
) -> WorkerPool:
    """Standard pool wiring: one logical worker loop per model service."""
    handlers = {
        "generate": lambda p: gen.generate(p),
        "generate_batch": lambda p: gen.generate_batch(p),
        "embed": lambda p: embedder.embed_batch(p),
        "rerank": lambda p: reranker.rerank_scores(p[0], p[1]),
    }
    return WorkerPool(handlers, workers_per_service=workers_per_service)


# ---------------------------------------------------------------------------
# Job state
# ---------------------------------------------------------------------------


@dataclass
class CaseState:
    case_id: str
    stages: dict[str, str] = field(default_factory=lambda: {s: "pending" for s in STAGES})
    timings_ms: dict[str, float] = field(default_factory=dict)
    keywords: list[str] = field(default_factory=list)
    error: str = ""

    def set(self, stage: str, status: str) -> None:
        self.stages[stage] = status

    def fail_from(self, stage: str, error: str) -> None:
        self.error = error
        self.stages[stage] = "failed"
        idx = STAGES.index(stage)
        for later in STAGES[idx + 1:]:
            if self.stages[later] == "pending":
                self.stages[later] = "skipped"


@dataclass
class JobState:
    job_id: str
    cases: list[CaseReport]
    case_states: dict[str, CaseState] = field(default_factory=dict)
    results: list[LearningModule] = field(default_factory=list)
    status: str = "pending"  # pending | running | done | failed

    def __post_init__(self) -> None:
        for case in self.cases:
            self.case_states.setdefault(case.case_id, CaseState(case_id=case.case_id))


@dataclass
class PipelineDeps:
    """Everything the pipeline needs besides the cases themselves."""

    pool: WorkerPool
    fetcher: Callable[[str], Awaitable[FetchResult]]
    index: VectorIndex | None = None
    k_local: int = 2
    keep_n: int = 2
    char_budget: int = 48_000
    max_cases_in_flight: int = DEFAULT_MAX_CASES_IN_FLIGHT


# ---------------------------------------------------------------------------
# Per-case stage graph
# ---------------------------------------------------------------------------


class _Timer:
    def __init__(self, state: CaseState, stage: str):
        self.state = state
        self.stage = stage

    def __enter__(self):
        self.start = time.monotonic()
        self.state.set(self.stage, "running")
        return self

    def __exit__(self, exc_type, *rest):
        elapsed = (time.monotonic() - self.start) * 1000
        self.state.timings_ms[self.stage] = self.state.timings_ms.get(self.stage, 0.0) + elapsed
        if exc_type is None and self.state.stages[self.stage] == "running":
            self.state.set(self.stage, "done")
        return False


async def run_case_stage_graph(
    case: CaseReport,
    keywords: KeywordSet,
    deps: PipelineDeps,
    state: CaseState,
) -> ContextBundle:
    """Hybrid retrieval then evidence processing, parallel per keyword."""
    hits_by_kw: dict[str, list[TextbookHit]] = {}
    fetch_by_kw: dict[str, FetchResult] = {}

    async def local_retrieval(kw: str) -> None:
        if deps.index is None:
            hits_by_kw[kw] = []
            return
        vecs = await deps.pool.adispatch("embed", [kw])
        hits_by_kw[kw] = search_by_vector(deps.index, vecs[0], deps.k_local)

    async def api_retrieval(kw: str) -> None:
        try:
            fetch_by_kw[kw] = await deps.fetcher(kw)
        except Exception as exc:  # noqa: BLE001 - degrade, don't fail the case
            log.warning("case %s keyword %r: academic retrieval failed: %s", case.case_id, kw, exc)
            fetch_by_kw[kw] = FetchResult(keyword=kw, items=[], source_failures={"all": str(exc)})

    with _Timer(state, "retrieve_local"), _Timer(state, "retrieve_api"):
        await asyncio.gather(
            *itertools.chain.from_iterable(
                (local_retrieval(kw), api_retrieval(kw)) for kw in keywords.keywords
            )
        )

    evidence: dict[str, RankedEvidence] = {}
    summaries: dict[str, TextbookSummary | None] = {}

    async def do_summary(kw: str) -> None:
        hits = hits_by_kw.get(kw, [])
        if not hits:
            summaries[kw] = None
            return
        try:
            completion = await deps.pool.adispatch("generate", build_summary_prompt(kw, hits))
            summaries[kw] = TextbookSummary(
                keyword=kw,
                summary=completion.strip(),
                source_page_ids=tuple(h.page_id for h in hits),
            )
        except Exception as exc:  # noqa: BLE001
            log.warning("case %s keyword %r: summarization failed: %s", case.case_id, kw, exc)
            summaries[kw] = None

    async def do_rerank(kw: str) -> None:
        candidates = fetch_by_kw[kw].items
        if not candidates:
            evidence[kw] = RankedEvidence(keyword=kw, items=(), kept=())
            return
        try:
            ctx_query = build_rerank_query(case, kw)
            docs = [f"{c.title}\n{c.abstract}" for c in candidates]
            scores = await deps.pool.adispatch("rerank", (ctx_query, docs))
            evidence[kw] = rerank_evidence(
                candidates, ctx_query, _PrescoredReranker(scores), keep_n=deps.keep_n, keyword=kw
            )
        except Exception as exc:  # noqa: BLE001
            log.warning("case %s keyword %r: rerank failed: %s", case.case_id, kw, exc)
            evidence[kw] = RankedEvidence(keyword=kw, items=(), kept=())

    with _Timer(state, "summarize"), _Timer(state, "rerank"):
        await asyncio.gather(
            *itertools.chain.from_iterable(
                (do_summary(kw), do_rerank(kw)) for kw in keywords.keywords
            )
        )

    with _Timer(state, "compose"):
        bundle = assemble_context(case, keywords, evidence, summaries)
    return bundle


class _PrescoredReranker:
    """Adapter feeding already-computed scores through the rerank contract."""

    def __init__(self, scores: Sequence[float]):
        self._scores = list(scores)

    def rerank_scores(self, query: str, documents: Sequence[str]) -> list[float]:
        return self._scores


# ---------------------------------------------------------------------------
# Cross-case batched generation
# ---------------------------------------------------------------------------


@dataclass
class GenerationBatches:
    education_prompts: list[Prompt]
    mcq_prompts: list[Prompt]
    case_ids: list[str]  # batch position -> case_id, shared by both batches


def build_generation_batches(
    bundles: Sequence[ContextBundle], char_budget: int = 48_000
) -> GenerationBatches:
    if not bundles:
        raise ValueError("at least one bundle required")
    return GenerationBatches(
        education_prompts=[build_education_prompt(b, char_budget) for b in bundles],
        mcq_prompts=[build_mcq_prompt(b, char_budget) for b in bundles],
        case_ids=[b.report.case_id for b in bundles],
    )


async def execute_generation(
    pool: WorkerPool, batches: GenerationBatches
) -> dict[str, tuple[str | None, str | None]]:
    """Submit both task batches as single dispatches, concurrently.

    Returns case_id -> (education completion | None, mcq completion | None);
    a failed batch nulls its column for every case, leaving the other intact.
    """
    edu_task = pool.adispatch("generate_batch", batches.education_prompts)
    mcq_task = pool.adispatch("generate_batch", batches.mcq_prompts)
    edu_res, mcq_res = await asyncio.gather(edu_task, mcq_task, return_exceptions=True)
    out: dict[str, tuple[str | None, str | None]] = {}
    edu_list = None if isinstance(edu_res, BaseException) else edu_res
    mcq_list = None if isinstance(mcq_res, BaseException) else mcq_res
    if edu_list is None:
        log.error("education batch failed: %s", edu_res)
    if mcq_list is None:
        log.error("MCQ batch failed: %s", mcq_res)
    for i, case_id in enumerate(batches.case_ids):
        out[case_id] = (
            edu_list[i] if edu_list is not None else None,
            mcq_list[i] if mcq_list is not None else None,
        )
    return out


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    job: JobState
    modules: list[LearningModule]
    report: dict


async def run_pipeline(
    cases: Sequence[CaseReport],
    deps: PipelineDeps,
    job_id: str = "",
    preset_keywords: dict[str, list[str]] | None = None,
    job: JobState | None = None,
) -> RunResult:
    """Run every case through the stage graph, then two-batch generation.

    ``preset_keywords`` skips decomposition for the named cases (keyword
    editing / re-run). An existing JobState may be passed in so callers can
    observe progress; otherwise one is created.
    """
    ids = [c.case_id for c in cases]
    if len(set(ids)) != len(ids):
        raise ValueError("case_id values must be unique within a run")
    job = job or JobState(job_id=job_id or uuid.uuid4().hex, cases=list(cases))
    job.status = "running"
    sem = asyncio.Semaphore(deps.max_cases_in_flight)
    bundles: dict[str, ContextBundle] = {}

    async def process_case(case: CaseReport) -> None:
        state = job.case_states[case.case_id]
        async with sem:
            preset = (preset_keywords or {}).get(case.case_id)
            try:
                with _Timer(state, "decompose"):
                    if preset is not None:
                        kws = KeywordSet(case_id=case.case_id, keywords=tuple(preset))
                    else:
                        completion = await deps.pool.adispatch(
                            "generate", build_keyword_prompt(case)
                        )
                        kws = parse_keywords(completion, case.case_id)
            except Exception as exc:  # noqa: BLE001
                state.fail_from("decompose", str(exc))
                return
            state.keywords = list(kws.keywords)
            if kws.empty:
                state.error = "no-keywords"
                for stage in STAGES[1:]:
                    state.set(stage, "skipped")
                return
            try:
                bundles[case.case_id] = await run_case_stage_graph(case, kws, deps, state)
            except Exception as exc:  # noqa: BLE001
                state.fail_from("compose", str(exc))

    await asyncio.gather(*(process_case(c) for c in cases))

    modules: list[LearningModule] = []
    ordered_bundles = [bundles[c.case_id] for c in cases if c.case_id in bundles]
    if ordered_bundles:
        gen_start = time.monotonic()
        batches = build_generation_batches(ordered_bundles, deps.char_budget)
        completions = await execute_generation(deps.pool, batches)
        gen_ms = (time.monotonic() - gen_start) * 1000
        for bundle in ordered_bundles:
            case_id = bundle.report.case_id
            state = job.case_states[case_id]
            state.timings_ms["generate"] = gen_ms
            edu, mcq = completions[case_id]
            if edu is None and mcq is None:
                state.fail_from("generate", "both generation batches failed")
                continue
            state.set("generate", "done")
            module = _parse_outputs(bundle, edu, mcq, state)
            modules.append(module)
            job.results.append(module)

    n_failed = sum(1 for s in job.case_states.values() if "failed" in s.stages.values())
    job.status = "failed" if cases and n_failed == len(cases) else "done"
    report = make_run_report(job)
    return RunResult(job=job, modules=modules, report=report)


def _parse_outputs(
    bundle: ContextBundle, edu: str | None, mcq: str | None, state: CaseState
) -> LearningModule:
    keywords = list(bundle.keywords.keywords)
    status_bits = []
    with _Timer(state, "parse"):
        education_text, sections = ("", {kw: "" for kw in keywords})
        if edu is not None:
            education_text, sections = parse_education(edu, keywords)
        else:
            status_bits.append("education_failed")
        mcqs = []
        if mcq is not None:
            try:
                parsed = parse_mcqs(mcq)
                by_kw = {kw: [q for q in parsed if q.keyword == kw] for kw in keywords}
                rest = [q for q in parsed if q.keyword not in keywords]
                mcqs = [q for kw in keywords for q in by_kw[kw]] + rest
            except CaseTutorError as exc:
                log.warning("case %s: MCQ parse failed: %s", bundle.report.case_id, exc)
                status_bits.append("mcq_parse_failed")
        else:
            status_bits.append("mcq_failed")
    return LearningModule(
        case_id=bundle.report.case_id,
        dataset_tag=bundle.report.dataset_tag,
        keywords=keywords,
        kept_evidence=[e for kw in keywords for e in bundle.evidence[kw].kept],
        summaries=[bundle.summaries[kw] for kw in keywords if bundle.summaries[kw] is not None],
        education_text=education_text,
        education_sections=sections,
        mcqs=mcqs,
        timings=dict(state.timings_ms),
        status=",".join(status_bits) if status_bits else "ok",
    )


async def run_generation_sequential(
    bundles: Sequence[ContextBundle], pool: WorkerPool, char_budget: int = 48_000
) -> dict[str, tuple[str, str]]:
    """Naive reference mode: one generate dispatch per prompt, one at a time."""
    out: dict[str, tuple[str, str]] = {}
    for bundle in bundles:
        edu = await pool.adispatch("generate", build_education_prompt(bundle, char_budget))
        mcq = await pool.adispatch("generate", build_mcq_prompt(bundle, char_budget))
        out[bundle.report.case_id] = (edu, mcq)
    return out


def make_run_report(job: JobState) -> dict:
    """Aggregate timings and failure accounting for one run."""
    per_stage: dict[str, dict[str, float]] = {}
    for stage in STAGES:
        values = [
            s.timings_ms[stage] for s in job.case_states.values() if stage in s.timings_ms
        ]
        if values:
            arr = np.asarray(values)
            per_stage[stage] = {
                "mean": round(float(arr.mean()), 3),
                "p50": round(float(np.percentile(arr, 50)), 3),
                "p95": round(float(np.percentile(arr, 95)), 3),
            }
    statuses = job.case_states.values()
    failures = [
        {"case_id": s.case_id, "error": s.error}
        for s in statuses
        if s.error and s.error != "no-keywords"
    ]
    return {
        "job_id": job.job_id,
        "n_cases": len(job.cases),
        "n_ok": len(job.results),
        "n_failed": len(failures),
        "n_skipped": sum(1 for s in statuses if s.error == "no-keywords"),
        "per_stage_timings_ms": per_stage,
        "failures": failures,
    }
