"""HTTP gateway consumed by the browser console."""
from __future__ import annotations

import asyncio
import dataclasses
import os
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from typing import Any

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from . import __version__
from .compose import LearningModule
from .config import RunConfig
from .decompose import CaseReport
from .engine import STAGES, JobState, PipelineDeps, run_pipeline
from .runtime import Runtime, build_runtime

_CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"
_ulid_lock = threading.Lock()
_ulid_last: tuple[int, int] = (0, 0)

# Stage-status lattice; a snapshot may only move a status forward.
_STATUS_RANK = {"pending": 0, "running": 1, "done": 2, "failed": 2, "skipped": 2}


def new_job_id() -> str:
    """26-char sortable id: 48-bit millisecond timestamp + 80 random bits."""
    global _ulid_last
    ts = int(time.time() * 1000)
    rand = int.from_bytes(os.urandom(10), "big")
    with _ulid_lock:
        if ts <= _ulid_last[0]:
            # Same-millisecond ids stay sortable by bumping the random tail.
            ts = _ulid_last[0]
            rand = (_ulid_last[1] + 1) % (1 << 80)
        _ulid_last = (ts, rand)
    value = (ts << 80) | rand
    chars = []
    for _ in range(26):
        chars.append(_CROCKFORD[value & 0x1F])
        value >>= 5
    return "".join(reversed(chars))


@dataclass
class JobRecord:
    job_id: str
    case: CaseReport
    state: JobState
    task: asyncio.Task | None = None
    module: LearningModule | None = None
    error: str = ""
    created_at: float = field(default_factory=time.time)
    # Last status reported per stage, used to keep snapshots monotone.
    _reported: dict[str, str] = field(default_factory=dict)

    @property
    def running(self) -> bool:
        return self.task is not None and not self.task.done()

    def snapshot(self) -> dict[str, Any]:
        cs = self.state.case_states[self.case.case_id]
        stages = {}
        for stage in STAGES:
            current = cs.stages[stage]
            prev = self._reported.get(stage, "pending")
            if _STATUS_RANK[current] < _STATUS_RANK[prev]:
                current = prev
            self._reported[stage] = current
            stages[stage] = current
        status = self.state.status
        if self.running and status == "pending":
            status = "running"
        out: dict[str, Any] = {
            "job_id": self.job_id,
            "status": status,
            "case_id": self.case.case_id,
            "stages": stages,
            "keywords": list(cs.keywords),
            "error": self.error or (cs.error if cs.error != "no-keywords" else ""),
            "no_keywords": cs.error == "no-keywords",
        }
        if self.module is not None:
            out["module"] = self.module.to_dict()
            out["evidence"] = [e.to_dict() for e in self.module.kept_evidence]
            out["summaries"] = [
                {
                    "keyword": s.keyword,
                    "summary": s.summary,
                    "source_page_ids": list(s.source_page_ids),
                }
                for s in self.module.summaries
            ]
        return out


def _deps_with_overrides(deps: PipelineDeps, overrides: dict | None) -> PipelineDeps:
    """Per-job tuning of the numeric pipeline knobs; everything else is shared."""
    if not overrides:
        return deps
    allowed = {"k_local", "keep_n", "char_budget", "max_cases_in_flight"}
    unknown = set(overrides) - allowed
    if unknown:
        raise HTTPException(422, detail=f"unknown config_overrides: {sorted(unknown)}")
    values = {}
    for key in allowed & set(overrides):
        value = overrides[key]
        if not isinstance(value, int) or value < 1:
            raise HTTPException(422, detail=f"config_overrides.{key} must be a positive integer")
        values[key] = value
    return dataclasses.replace(deps, **values)


def create_app(config: RunConfig | None = None, mock: bool = True, runtime: Runtime | None = None) -> FastAPI:
    """Build the gateway app; pass a prebuilt Runtime to share backends in tests."""
    config = config or RunConfig()
    jobs: dict[str, JobRecord] = {}
    state: dict[str, Any] = {"runtime": runtime}

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        rt = state["runtime"]
        if rt is not None:
            await rt.close()

    app = FastAPI(title="casetutor gateway", version=__version__, lifespan=lifespan)

    def get_runtime() -> Runtime:
        if state["runtime"] is None:
            state["runtime"] = build_runtime(config, mock=mock)
        return state["runtime"]

    def start_job(
        case: CaseReport,
        overrides: dict | None,
        preset_keywords: dict[str, list[str]] | None = None,
    ) -> JobRecord:
        rt = get_runtime()
        deps = _deps_with_overrides(rt.deps, overrides)
        job_id = new_job_id()
        job_state = JobState(job_id=job_id, cases=[case])
        record = JobRecord(job_id=job_id, case=case, state=job_state)

        async def runner() -> None:
            try:
                result = await run_pipeline(
                    [case], deps, job_id=job_id, preset_keywords=preset_keywords, job=job_state
                )
                if result.modules:
                    record.module = result.modules[0]
                cs = job_state.case_states[case.case_id]
                if cs.error and cs.error != "no-keywords":
                    record.error = cs.error
            except Exception as exc:  # noqa: BLE001 - surface through the snapshot
                record.error = str(exc)
                job_state.status = "failed"

        record.task = asyncio.get_running_loop().create_task(runner())
        jobs[job_id] = record
        return record

    @app.get("/api/v1/health")
    async def health() -> dict:
        rt = state["runtime"]
        return {
            "status": "ok",
            "version": __version__,
            "mock": rt.mock if rt is not None else mock,
            "jobs": len(jobs),
        }

    @app.post("/api/v1/cases", status_code=202)
    async def submit_case(body: dict) -> dict:
        report_text = body.get("report_text")
        if not isinstance(report_text, str) or not report_text.strip():
            raise HTTPException(422, detail="report_text must be a non-empty string")
        impression = body.get("impression", "")
        if not isinstance(impression, str):
            raise HTTPException(422, detail="impression must be a string")
        overrides = body.get("config_overrides")
        if overrides is not None and not isinstance(overrides, dict):
            raise HTTPException(422, detail="config_overrides must be an object")
        record = start_job(
            CaseReport(
                case_id=new_job_id().lower(),
                full_text=report_text,
                impression=impression,
                dataset_tag="gateway",
            ),
            overrides,
        )
        return {"job_id": record.job_id}

    @app.get("/api/v1/jobs/{job_id}")
    async def get_job(job_id: str) -> JSONResponse:
        record = jobs.get(job_id)
        if record is None:
            raise HTTPException(404, detail=f"unknown job {job_id}")
        return JSONResponse(record.snapshot())

    @app.post("/api/v1/jobs/{job_id}/keywords", status_code=202)
    async def rerun_with_keywords(job_id: str, body: dict) -> dict:
        record = jobs.get(job_id)
        if record is None:
            raise HTTPException(404, detail=f"unknown job {job_id}")
        if record.running:
            raise HTTPException(409, detail=f"job {job_id} is still running")
        keywords = body.get("keywords")
        if (
            not isinstance(keywords, list)
            or not keywords
            or not all(isinstance(k, str) and k.strip() for k in keywords)
        ):
            raise HTTPException(422, detail="keywords must be a non-empty list of non-empty strings")
        cleaned: list[str] = []
        seen: set[str] = set()
        for k in keywords:
            k = k.strip()
            if k.lower() not in seen:
                seen.add(k.lower())
                cleaned.append(k)
        overrides = body.get("config_overrides")
        if overrides is not None and not isinstance(overrides, dict):
            raise HTTPException(422, detail="config_overrides must be an object")
        new_record = start_job(
            record.case, overrides, preset_keywords={record.case.case_id: cleaned}
        )
        return {"job_id": new_record.job_id, "parent_job_id": job_id}

    return app
