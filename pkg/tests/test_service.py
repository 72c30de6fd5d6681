"""Review service tests: endpoint contract, errors, idempotency, diffs."""

import time

import pytest
from fastapi.testclient import TestClient

from scenarioforge.bootstrap import initialize_store
from scenarioforge.rubric import default_rubric
from scenarioforge.service import create_app

UC = "uc-developer-productivity"


@pytest.fixture
def client(tmp_path):
    store = initialize_store(tmp_path / "store")
    app = create_app(store)
    with TestClient(app) as c:
        yield c


def wait_for_job(client, job_id, timeout_s=10.0):
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        body = client.get(f"/api/jobs/{job_id}").json()
        if body["doc"]["status"] in ("awaiting_review", "completed", "failed"):
            return body
        time.sleep(0.01)
    raise AssertionError(f"job {job_id} did not finish")


def expand(client, use_case=UC, stage=1, count=None, expect_status="awaiting_review"):
    payload = {"stage": stage}
    if count is not None:
        payload["count"] = count
    r = client.post(f"/api/use-cases/{use_case}/expand", json=payload)
    assert r.status_code == 202, r.text
    body = wait_for_job(client, r.json()["job_id"])
    assert body["doc"]["status"] == expect_status, body
    return body


def pending(client, **params):
    r = client.get("/api/reviews/pending", params=params)
    assert r.status_code == 200
    return r.json()["pending"]


def review(client, scenario_id, stage, verdict, reviewer="alice", **kwargs):
    headers = {"X-Reviewer": reviewer}
    headers.update(kwargs.pop("headers", {}))
    body = {"stage": stage, "verdict": verdict}
    body.update(kwargs)
    return client.post(f"/api/scenarios/{scenario_id}/reviews", json=body,
                       headers=headers)


class TestUseCases:
    def test_list_six_fixtures(self, client):
        body = client.get("/api/use-cases").json()
        assert len(body["use_cases"]) == 6
        ids = {u["doc"]["id"] for u in body["use_cases"]}
        assert UC in ids

    def test_get_sets_etag(self, client):
        r = client.get(f"/api/use-cases/{UC}")
        assert r.status_code == 200
        assert r.headers["ETag"] == '"1"'

    def test_unknown_id_404_structured(self, client):
        r = client.get("/api/use-cases/uc-ghost")
        assert r.status_code == 404
        assert r.json()["code"] == "unknown_id"

    def test_status_endpoint(self, client):
        expand(client, count=4)
        r = client.get(f"/api/use-cases/{UC}/status")
        body = r.json()
        assert body["total_scenarios"] == 4
        assert body["per_stage"]["stage1"]["pending_review"] == 4


class TestExpansionJobs:
    def test_expand_job_lifecycle_and_effective_status(self, client):
        job = expand(client, count=2)
        assert job["doc"]["target_count"] == 2
        assert len(job["doc"]["scenario_ids"]) == 2
        assert job["effective_status"] == "awaiting_review"
        for sid in job["doc"]["scenario_ids"]:
            assert review(client, sid, 1, "approve").status_code == 200
        done = client.get(f"/api/jobs/{job['doc']['id']}").json()
        assert done["doc"]["status"] == "awaiting_review"
        assert done["effective_status"] == "completed"

    def test_expand_stage2_without_approvals_409(self, client):
        expand(client, count=1)
        r = client.post(f"/api/use-cases/{UC}/expand", json={"stage": 2})
        assert r.status_code == 409
        assert r.json()["code"] == "stage_order"

    def test_invalid_count_422(self, client):
        r = client.post(f"/api/use-cases/{UC}/expand",
                        json={"stage": 1, "count": 0})
        assert r.status_code == 422
        assert r.json()["code"] == "validation"

    def test_malformed_body_400(self, client):
        r = client.post(f"/api/use-cases/{UC}/expand",
                        json={"stage": "one"})
        assert r.status_code == 400
        assert r.json()["code"] == "malformed_body"

    def test_unknown_backend_422(self, client):
        r = client.post(f"/api/use-cases/{UC}/expand",
                        json={"stage": 1, "count": 1, "backend_id": "ghost"})
        assert r.status_code == 422
        assert r.json()["code"] == "unknown_backend"


class TestReviews:
    def test_queue_is_oldest_first_and_filterable(self, client):
        expand(client, count=3)
        queue = pending(client)
        assert len(queue) == 3
        since = [item["pending_since"] for item in queue]
        assert since == sorted(since)
        assert all(item["title"] for item in queue)
        assert pending(client, stage=2) == []
        assert len(pending(client, use_case=UC)) == 3

    def test_approve_pending_stage1(self, client):
        expand(client, count=1)
        sid = pending(client)[0]["scenario_id"]
        r = review(client, sid, 1, "approve")
        assert r.status_code == 200
        assert r.json()["new_state"] == "approved"
        assert pending(client) == []

    def test_review_already_approved_409(self, client):
        expand(client, count=1)
        sid = pending(client)[0]["scenario_id"]
        review(client, sid, 1, "approve")
        r = review(client, sid, 1, "approve")
        assert r.status_code == 409
        assert r.json()["code"] == "review_state"

    def test_invalid_edit_payload_422_with_findings(self, client):
        expand(client, count=1)
        sid = pending(client)[0]["scenario_id"]
        r = review(client, sid, 1, "edit_and_approve",
                   edited_payload={"title": "Edited",
                                   "description": "Two. Sentences."})
        assert r.status_code == 422
        body = r.json()
        assert body["code"] == "validation"
        assert any(f["rule"] == "one_sentence" for f in body["findings"])
        assert any(f["field"] == "description" for f in body["findings"])

    def test_stale_if_match_409(self, client):
        expand(client, count=1)
        sid = pending(client)[0]["scenario_id"]
        current = client.get(f"/api/scenarios/{sid}").headers["ETag"]
        assert current == '"1"'
        r = review(client, sid, 1, "approve", headers={"If-Match": '"99"'})
        assert r.status_code == 409
        assert r.json()["code"] == "revision_conflict"
        # retry with the fresh revision succeeds
        r = review(client, sid, 1, "approve", headers={"If-Match": current})
        assert r.status_code == 200

    def test_idempotency_key_replay_returns_original(self, client):
        expand(client, count=1)
        sid = pending(client)[0]["scenario_id"]
        headers = {"Idempotency-Key": "review-1"}
        first = review(client, sid, 1, "approve", headers=headers)
        assert first.status_code == 200
        replay = review(client, sid, 1, "approve", headers=headers)
        assert replay.status_code == 200
        assert replay.json() == first.json()
        # without the key the same call now conflicts
        again = review(client, sid, 1, "approve")
        assert again.status_code == 409

    def test_mutation_writes_exactly_one_audit_event(self, client):
        expand(client, count=1)
        sid = pending(client)[0]["scenario_id"]
        store = client.app.state.store
        before = store.audit_event_count()
        assert review(client, sid, 1, "approve").status_code == 200
        assert store.audit_event_count() == before + 1

    def test_regeneration_flow_via_service(self, client):
        expand(client, count=1)
        sid = pending(client)[0]["scenario_id"]
        r = review(client, sid, 1, "request_regeneration",
                   comments="sharpen the title")
        assert r.json()["new_state"] == "changes_requested"
        job = expand(client, stage=1)
        assert sid in job["doc"]["scenario_ids"]
        assert pending(client)[0]["scenario_id"] == sid


class TestDiff:
    def test_human_edit_diff_equals_touched_fields(self, client):
        expand(client, count=1)
        sid = pending(client)[0]["scenario_id"]
        doc = client.get(f"/api/scenarios/{sid}").json()["doc"]
        r = review(client, sid, 1, "edit_and_approve", edited_payload={
            "title": doc["title"],
            "description": "A reviewer tightened this sentence."})
        assert r.status_code == 200, r.text
        diff = client.get(f"/api/scenarios/{sid}/diff",
                          params={"from": 0, "to": 1}).json()
        assert [c["field"] for c in diff["changes"]] == ["description"]
        assert diff["changes"][0]["to"] == "A reviewer tightened this sentence."

    def test_unknown_revision_404(self, client):
        expand(client, count=1)
        sid = pending(client)[0]["scenario_id"]
        r = client.get(f"/api/scenarios/{sid}/diff",
                       params={"from": 0, "to": 5})
        assert r.status_code == 404


class TestRubricAndCoverage:
    def _full_scenario(self, client):
        expand(client, count=1)
        sid = pending(client)[0]["scenario_id"]
        review(client, sid, 1, "approve")
        expand(client, stage=2)
        review(client, sid, 2, "approve")
        expand(client, stage=3)
        review(client, sid, 3, "approve")
        return sid

    def test_rubric_scoring(self, client):
        sid = self._full_scenario(client)
        scores = {c.id: 4 for c in default_rubric().categories}
        r = client.post(f"/api/scenarios/{sid}/rubric",
                        json={"scores": scores},
                        headers={"X-Reviewer": "carol"})
        assert r.status_code == 200, r.text
        body = r.json()
        assert body["weighted_score"] == 0.8
        assert body["verdict"] == "ready"
        assert body["assessed_by"] == "carol"

    def test_rubric_rejects_bad_scores(self, client):
        sid = self._full_scenario(client)
        r = client.post(f"/api/scenarios/{sid}/rubric",
                        json={"scores": {"made-up": 3}})
        assert r.status_code == 422

    def test_rubric_definition_endpoint(self, client):
        r = client.get("/api/rubric")
        assert r.status_code == 200
        assert len(r.json()["categories"]) == 8

    def test_coverage_endpoint_matches_scenarios(self, client):
        self._full_scenario(client)
        body = client.get("/api/coverage").json()
        assert body["total_scenarios"] == 1
        assert sum(body["counts"].values()) >= 1
        scoped = client.get("/api/coverage",
                            params={"use_case": "uc-sar-filing"}).json()
        assert scoped["total_scenarios"] == 0

    def test_export_summary_endpoint(self, client):
        self._full_scenario(client)
        r = client.get("/api/export/summary", params={"format": "csv"})
        assert r.status_code == 200
        assert r.headers["content-type"].startswith("text/csv")
        assert r.text.splitlines()[0] == \
            "Use Case,Scenario Title,Scenario Description"
        md = client.get("/api/export/summary", params={"format": "md"})
        assert md.headers["content-type"].startswith("text/markdown")
        bad = client.get("/api/export/summary", params={"format": "xml"})
        assert bad.status_code == 422
