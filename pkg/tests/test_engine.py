import asyncio
import threading
import time

import pytest

from casetutor.backends import MockBackend
from casetutor.decompose import CaseReport
from casetutor.engine import (
    STAGES,
    PipelineDeps,
    WorkerFailure,
    WorkerPool,
    build_generation_batches,
    build_pool,
    execute_generation,
    make_run_report,
    run_generation_sequential,
    run_pipeline,
)
from casetutor.errors import PoolShutdownError
from casetutor.runtime import build_runtime, load_cases, data_path, FIXTURE_CASES, mock_fetch
from casetutor.config import RunConfig


class TestWorkerPool:
    def test_dispatch_returns_result(self):
        with WorkerPool({"double": lambda x: x * 2}) as pool:
            assert pool.dispatch("double", 21).result(timeout=5) == 42

    def test_error_crosses_queue_as_worker_failure(self):
        def boom(x):
            raise RuntimeError("kaboom")

        with WorkerPool({"svc": boom}) as pool:
            with pytest.raises(WorkerFailure, match="kaboom"):
                pool.dispatch("svc", None).result(timeout=5)

    def test_unknown_service(self):
        with WorkerPool({"svc": lambda x: x}) as pool:
            with pytest.raises(KeyError):
                pool.dispatch("nope", 1)

    def test_dispatch_after_shutdown_raises(self):
        pool = WorkerPool({"svc": lambda x: x}).start()
        pool.shutdown()
        with pytest.raises(PoolShutdownError):
            pool.dispatch("svc", 1)

    def test_no_pending_after_completion(self):
        with WorkerPool({"svc": lambda x: x}) as pool:
            futs = [pool.dispatch("svc", i) for i in range(50)]
            assert [f.result(timeout=5) for f in futs] == list(range(50))
            deadline = time.monotonic() + 2
            while pool.pending_count() and time.monotonic() < deadline:
                time.sleep(0.005)
            assert pool.pending_count() == 0

    def test_interleaved_services_resolve_correctly(self):
        with WorkerPool({"a": lambda x: ("a", x), "b": lambda x: ("b", x)}, workers_per_service=2) as pool:
            futs = [(s, i, pool.dispatch(s, i)) for i in range(40) for s in ("a", "b")]
            for s, i, f in futs:
                assert f.result(timeout=5) == (s, i)

    def test_adispatch_from_event_loop(self):
        async def go(pool):
            return await pool.adispatch("svc", 7)

        with WorkerPool({"svc": lambda x: x + 1}) as pool:
            assert asyncio.run(go(pool)) == 8

    def test_dispatch_counts_instrumented(self):
        with WorkerPool({"svc": lambda x: x}) as pool:
            for i in range(3):
                pool.dispatch("svc", i).result(timeout=5)
            assert pool.dispatch_counts["svc"] == 3

    def test_worker_threads_run_concurrently(self):
        barrier = threading.Barrier(4, timeout=5)

        def wait(_):
            barrier.wait()
            return True

        with WorkerPool({"svc": wait}, workers_per_service=4) as pool:
            futs = [pool.dispatch("svc", i) for i in range(4)]
            assert all(f.result(timeout=5) for f in futs)


def _mock_deps(backend=None, **kwargs):
    backend = backend or MockBackend()
    pool = build_pool(backend, backend, backend).start()
    from casetutor.textbook import build_index, ingest_pages

    index = build_index(ingest_pages(data_path("fixture_pages.jsonl")), backend)
    return pool, PipelineDeps(pool=pool, fetcher=mock_fetch, index=index, **kwargs)


class TestRunPipeline:
    def test_full_mock_run(self):
        cases = load_cases(data_path(FIXTURE_CASES))[:3]
        pool, deps = _mock_deps()
        try:
            result = asyncio.run(run_pipeline(cases, deps))
        finally:
            pool.shutdown()
        assert result.job.status == "done"
        assert len(result.modules) == 3
        for case in cases:
            state = result.job.case_states[case.case_id]
            assert all(state.stages[s] == "done" for s in STAGES)
        module = result.modules[0]
        assert module.keywords
        assert module.mcqs and module.education_text
        assert module.summaries and module.kept_evidence
        # exactly two cross-case batch dispatches
        assert pool.dispatch_counts["generate_batch"] == 2

    def test_duplicate_case_ids_rejected(self):
        case = CaseReport(case_id="x", full_text="FINDINGS: pneumonia.")
        pool, deps = _mock_deps()
        try:
            with pytest.raises(ValueError):
                asyncio.run(run_pipeline([case, case], deps))
        finally:
            pool.shutdown()

    def test_preset_keywords_skip_decomposition(self):
        case = CaseReport(case_id="x", full_text="FINDINGS: completely unremarkable study.")
        pool, deps = _mock_deps()
        try:
            result = asyncio.run(
                run_pipeline([case], deps, preset_keywords={"x": ["pneumothorax"]})
            )
        finally:
            pool.shutdown()
        assert result.modules[0].keywords == ["pneumothorax"]
        assert pool.dispatch_counts["generate"] >= 1  # summaries still generated

    def test_no_keyword_case_skips_downstream(self):
        case = CaseReport(case_id="x", full_text="FINDINGS: unremarkable study, no acute findings.")
        pool, deps = _mock_deps()
        try:
            result = asyncio.run(run_pipeline([case], deps))
        finally:
            pool.shutdown()
        assert result.modules == []
        state = result.job.case_states["x"]
        assert state.stages["decompose"] == "done"
        assert all(state.stages[s] == "skipped" for s in STAGES[1:])
        assert result.report["n_skipped"] == 1
        assert result.job.status == "done"

    def test_fetcher_failure_degrades_not_fails(self):
        async def failing_fetcher(keyword):
            raise RuntimeError("network down")

        backend = MockBackend()
        pool = build_pool(backend, backend, backend).start()
        from casetutor.textbook import build_index, ingest_pages

        index = build_index(ingest_pages(data_path("fixture_pages.jsonl")), backend)
        deps = PipelineDeps(pool=pool, fetcher=failing_fetcher, index=index)
        case = CaseReport(case_id="x", full_text="FINDINGS: pneumonia in the right lower lobe.")
        try:
            result = asyncio.run(run_pipeline([case], deps))
        finally:
            pool.shutdown()
        assert len(result.modules) == 1
        assert result.modules[0].kept_evidence == []
        assert result.modules[0].summaries  # textbook arm still worked

    def test_generation_failure_fails_case(self):
        class NoBatch(MockBackend):
            def generate_batch(self, prompts):
                raise RuntimeError("generation backend down")

        pool, deps = _mock_deps(backend=NoBatch())
        case = CaseReport(case_id="x", full_text="FINDINGS: pneumonia.")
        try:
            result = asyncio.run(run_pipeline([case], deps))
        finally:
            pool.shutdown()
        assert result.modules == []
        assert result.job.status == "failed"
        assert result.job.case_states["x"].stages["generate"] == "failed"

    def test_run_report_shape(self):
        cases = load_cases(data_path(FIXTURE_CASES))[:2]
        pool, deps = _mock_deps()
        try:
            result = asyncio.run(run_pipeline(cases, deps))
        finally:
            pool.shutdown()
        report = result.report
        assert report["n_cases"] == 2 and report["n_ok"] == 2 and report["n_failed"] == 0
        for stage in STAGES:
            stats = report["per_stage_timings_ms"][stage]
            assert set(stats) == {"mean", "p50", "p95"}


class TestGenerationBatches:
    def test_batched_equals_sequential_output(self, sample_bundle):
        backend = MockBackend()
        pool = build_pool(backend, backend, backend).start()
        try:
            batches = build_generation_batches([sample_bundle])

            async def go():
                batched = await execute_generation(pool, batches)
                sequential = await run_generation_sequential([sample_bundle], pool)
                return batched, sequential

            batched, sequential = asyncio.run(go())
        finally:
            pool.shutdown()
        case_id = sample_bundle.report.case_id
        assert batched[case_id] == sequential[case_id]

    def test_empty_bundles_rejected(self):
        with pytest.raises(ValueError):
            build_generation_batches([])

    def test_one_failed_batch_preserves_other(self, sample_bundle):
        class EduFails(MockBackend):
            def generate_batch(self, prompts):
                if "Supporting Educational Material" in prompts[0].user:
                    raise RuntimeError("edu batch down")
                return super().generate_batch(prompts)

        backend = EduFails()
        pool = build_pool(backend, backend, backend).start()
        try:
            batches = build_generation_batches([sample_bundle])
            out = asyncio.run(execute_generation(pool, batches))
        finally:
            pool.shutdown()
        edu, mcq = out[sample_bundle.report.case_id]
        assert edu is None and mcq is not None


def test_build_runtime_mock_round_trip():
    rt = build_runtime(RunConfig(), mock=True)
    try:
        cases = load_cases(data_path(FIXTURE_CASES))[:2]
        result = asyncio.run(run_pipeline(cases, rt.deps))
        assert len(result.modules) == 2
    finally:
        asyncio.run(rt.close())
