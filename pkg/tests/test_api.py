from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from fixture_feed import NOW, WINDOW_START
from repairbot.api import create_app
from repairbot.service import PipelineService, RunConfig


@pytest.fixture(scope="module")
def loaded_service(feed_spec, tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("api")
    service = PipelineService(RunConfig(
        feed_locator=str(feed_spec.root),
        archive_path=tmp_path / "archive.jsonl",
        workdir=tmp_path / "work",
        workers=2,
    ))
    service.run_once(WINDOW_START, NOW)
    yield service
    service.close()


@pytest.fixture()
def client(loaded_service):
    return TestClient(create_app(loaded_service))


def test_pending_queue_in_server_order(client):
    items = client.get("/patches").json()
    assert items, "expected a pending queue"
    flag_counts = [len(item["flags"]) for item in items]
    assert flag_counts == sorted(flag_counts)  # unflagged first
    first = items[0]
    assert {"patch_id", "project", "build_id", "build_link", "tool", "diff",
            "flags", "age_seconds", "verdict", "created_at"} <= set(first)
    assert first["verdict"] == "pending"


def test_get_patch_includes_build_context(client):
    patch_id = client.get("/patches").json()[0]["patch_id"]
    item = client.get(f"/patches/{patch_id}").json()
    assert item["patch_id"] == patch_id
    assert item["build"] is not None
    assert item["build"]["build_id"] == item["build_id"]


def test_get_unknown_patch_404(client):
    assert client.get("/patches/nope").status_code == 404


def test_unknown_status_param_400(client):
    assert client.get("/patches", params={"status": "weird"}).status_code == 400


def test_verdict_flow_and_conflict(client):
    items = client.get("/patches").json()
    patch_id = items[-1]["patch_id"]
    response = client.post(f"/patches/{patch_id}/verdict", json={
        "verdict": "overfitting", "analyst_id": "ana", "note": "constant guard"})
    assert response.status_code == 200
    assert response.json()["verdict"] == "overfitting"
    pending_ids = [i["patch_id"] for i in client.get("/patches").json()]
    assert patch_id not in pending_ids
    decided = client.get("/patches", params={"status": "decided"}).json()
    assert patch_id in [i["patch_id"] for i in decided]
    conflict = client.post(f"/patches/{patch_id}/verdict", json={
        "verdict": "correct", "analyst_id": "ana"})
    assert conflict.status_code == 409


def test_bad_verdict_value_400(client):
    patch_id = client.get("/patches").json()[0]["patch_id"]
    response = client.post(f"/patches/{patch_id}/verdict", json={
        "verdict": "maybe", "analyst_id": "ana"})
    assert response.status_code == 400


def test_propose_only_after_correct(client, loaded_service):
    items = client.get("/patches").json()
    patch_id = items[0]["patch_id"]
    forbidden = client.post(f"/patches/{patch_id}/propose", json={"analyst_id": "ana"})
    assert forbidden.status_code == 403
    client.post(f"/patches/{patch_id}/verdict", json={
        "verdict": "correct", "analyst_id": "ana"})
    allowed = client.post(f"/patches/{patch_id}/propose", json={"analyst_id": "ana"})
    assert allowed.status_code == 200
    body = allowed.json()
    assert body["branch"] == f"repair/{patch_id}"
    from pathlib import Path

    assert Path(body["clone"]).is_dir()
    assert Path(body["description"]).is_file()


def test_verdict_on_proposed_patch_conflicts(client):
    decided = client.get("/patches", params={"status": "decided"}).json()
    correct = [i for i in decided if i["verdict"] == "correct"]
    assert correct
    response = client.post(f"/patches/{correct[0]['patch_id']}/verdict", json={
        "verdict": "duplicate_human_fix", "analyst_id": "other"})
    assert response.status_code == 409


def test_stats_endpoint(client):
    stats = client.get("/stats").json()
    assert stats["builds_collected"] == 8
    assert stats["interesting"] == 7
    assert sum(stats["outcomes"].values()) == 7
    assert "pending" in stats


def test_stats_report_endpoint(client):
    doc = client.get("/stats/report", params={"format": "csv"}).json()
    assert "# table: signatures" in doc["report"]
    assert client.get("/stats/report", params={"format": "pdf"}).status_code == 400


def test_hook_endpoint_accepts_and_rejects(client):
    response = client.post("/hooks/ci", json={
        "event": "build_finished", "build_id": "b6-npe", "status": "failed"})
    assert response.status_code == 202
    assert response.json().get("duplicate") is True  # already attempted in the run
    ignored = client.post("/hooks/ci", json={
        "event": "build_finished", "build_id": "b8-pass", "status": "passed"})
    assert ignored.status_code == 202
    assert ignored.json()["status"] == "ignored"
    bad = client.post("/hooks/ci", json={"event": "push"})
    assert bad.status_code == 400


def test_static_token_guard(feed_spec, tmp_path):
    service = PipelineService(RunConfig(
        feed_locator=str(feed_spec.root),
        archive_path=tmp_path / "archive.jsonl",
        workdir=tmp_path / "work",
        api_token="sekrit",
    ))
    client = TestClient(create_app(service))
    assert client.get("/patches").status_code == 401
    assert client.get("/patches", headers={"X-Auth-Token": "wrong"}).status_code == 401
    assert client.get("/patches", headers={"X-Auth-Token": "sekrit"}).status_code == 200
    service.close()


def test_dashboard_static_mount(loaded_service, tmp_path):
    static = tmp_path / "dist"
    static.mkdir()
    (static / "index.html").write_text("<!doctype html><title>triage</title>")
    client = TestClient(create_app(loaded_service, static_dir=static))
    response = client.get("/")
    assert response.status_code == 200
    assert "triage" in response.text
