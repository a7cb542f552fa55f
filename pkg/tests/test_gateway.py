import time

import pytest
from fastapi.testclient import TestClient

from casetutor.api import _STATUS_RANK, create_app, new_job_id
from casetutor.backends import MockBackend
from casetutor.config import RunConfig
from casetutor.engine import PipelineDeps, build_pool
from casetutor.runtime import Runtime, build_runtime, mock_fetch

import golden_blocks


REPORT = golden_blocks.REPORT_TEXT.replace(
    "Acute appendicitis", "Acute appendicitis"
)


def wait_done(client, job_id, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        snap = client.get(f"/api/v1/jobs/{job_id}").json()
        if snap["status"] in ("done", "failed"):
            return snap
        time.sleep(0.02)
    raise AssertionError("job did not finish in time")


@pytest.fixture
def client():
    app = create_app(RunConfig(), mock=True)
    with TestClient(app) as c:
        yield c


class TestJobIds:
    def test_format_and_sortability(self):
        ids = [new_job_id() for _ in range(100)]
        assert all(len(j) == 26 for j in ids)
        assert ids == sorted(ids)
        assert len(set(ids)) == 100


class TestHealth:
    def test_health(self, client):
        body = client.get("/api/v1/health").json()
        assert body["status"] == "ok" and body["mock"] is True


class TestSubmitCase:
    def test_full_round_trip(self, client):
        r = client.post("/api/v1/cases", json={"report_text": REPORT})
        assert r.status_code == 202
        snap = wait_done(client, r.json()["job_id"])
        assert snap["status"] == "done"
        assert snap["keywords"] == ["acute appendicitis", "colonic diverticulosis"]
        assert all(v == "done" for v in snap["stages"].values())
        assert snap["module"]["mcqs"]
        assert snap["evidence"] and snap["summaries"]

    def test_validation(self, client):
        assert client.post("/api/v1/cases", json={"report_text": ""}).status_code == 422
        assert client.post("/api/v1/cases", json={}).status_code == 422
        assert (
            client.post(
                "/api/v1/cases", json={"report_text": "x", "config_overrides": "nope"}
            ).status_code
            == 422
        )
        assert (
            client.post(
                "/api/v1/cases",
                json={"report_text": "x", "config_overrides": {"unknown_knob": 1}},
            ).status_code
            == 422
        )

    def test_snapshot_statuses_monotone(self, client):
        r = client.post("/api/v1/cases", json={"report_text": REPORT})
        job_id = r.json()["job_id"]
        prev = {}
        for _ in range(200):
            snap = client.get(f"/api/v1/jobs/{job_id}").json()
            for stage, status in snap["stages"].items():
                if stage in prev:
                    assert _STATUS_RANK[status] >= _STATUS_RANK[prev[stage]]
            prev = snap["stages"]
            if snap["status"] in ("done", "failed"):
                break


class TestJobLookup:
    def test_unknown_job_404(self, client):
        assert client.get("/api/v1/jobs/NOSUCHJOB").status_code == 404
        assert client.post("/api/v1/jobs/NOSUCHJOB/keywords", json={"keywords": ["x"]}).status_code == 404


class TestKeywordRerun:
    def test_rerun_uses_preset_keywords(self, client):
        job_id = client.post("/api/v1/cases", json={"report_text": REPORT}).json()["job_id"]
        wait_done(client, job_id)
        r = client.post(
            f"/api/v1/jobs/{job_id}/keywords",
            json={"keywords": ["pneumothorax", "  pneumothorax ", "scoliosis"]},
        )
        assert r.status_code == 202
        assert r.json()["parent_job_id"] == job_id
        snap = wait_done(client, r.json()["job_id"])
        assert snap["keywords"] == ["pneumothorax", "scoliosis"]
        assert snap["module"]["keywords"] == ["pneumothorax", "scoliosis"]

    def test_invalid_keywords_422(self, client):
        job_id = client.post("/api/v1/cases", json={"report_text": REPORT}).json()["job_id"]
        wait_done(client, job_id)
        for body in ({"keywords": []}, {"keywords": ["", "x"]}, {"keywords": "x"}, {}):
            assert client.post(f"/api/v1/jobs/{job_id}/keywords", json=body).status_code == 422

    def test_running_job_409(self):
        # A slow backend keeps the first job running while the rerun arrives.
        backend = MockBackend(latency_ms=250)
        pool = build_pool(backend, backend, backend).start()
        from casetutor.runtime import data_path
        from casetutor.textbook import build_index, ingest_pages

        index = build_index(ingest_pages(data_path("fixture_pages.jsonl")), backend)
        runtime = Runtime(
            config=RunConfig(),
            pool=pool,
            deps=PipelineDeps(pool=pool, fetcher=mock_fetch, index=index),
            mock=True,
        )
        app = create_app(RunConfig(), mock=True, runtime=runtime)
        with TestClient(app) as c:
            job_id = c.post("/api/v1/cases", json={"report_text": REPORT}).json()["job_id"]
            r = c.post(f"/api/v1/jobs/{job_id}/keywords", json={"keywords": ["x"]})
            assert r.status_code == 409
            wait_done(c, job_id, timeout=30)
