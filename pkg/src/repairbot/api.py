"""Triage HTTP API: the pending-patch queue, verdicts, proposals, stats,
and the CI hook endpoint; also serves the dashboard's static bundle."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Header, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .archive import export_report
from .model import ts_from_str, ts_to_str
from .service import (
    HookRejected,
    PipelineService,
    QueueItem,
    TriageConflict,
    TriageForbidden,
    TriageStore,
)


class VerdictRequest(BaseModel):
    verdict: str
    analyst_id: str
    note: str = ""


class ProposeRequest(BaseModel):
    analyst_id: str = ""


class HookEvent(BaseModel):
    event: str
    build_id: str = ""
    status: str = ""


def _item_view(item: QueueItem, service: PipelineService, now) -> dict:
    payload = item.payload
    created = ts_from_str(payload["created_at"])
    return {
        "patch_id": payload["patch_id"],
        "project": payload.get("project", ""),
        "build_id": payload["build_id"],
        "build_link": f"{service.config.feed_locator}::{payload['build_id']}",
        "tool": payload["tool_name"],
        "diff": payload["edit"],
        "flags": [f for f in payload["overfitting_flags"] if f != "none"],
        "age_seconds": max(0, int((now - created).total_seconds())),
        "verdict": item.verdict,
        "created_at": payload["created_at"],
        "note": payload.get("note", ""),
    }


def create_app(service: PipelineService, static_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="repairbot triage API")
    store = TriageStore(
        service.archive, service.feed,
        service.config.workdir / "proposals",
        clock=service.clock,
    )
    app.state.service = service
    app.state.store = store

    def check_token(x_auth_token: Optional[str] = Header(default=None)) -> None:
        expected = service.config.api_token
        if expected is not None and x_auth_token != expected:
            raise HTTPException(status_code=401, detail="bad or missing X-Auth-Token")

    guarded = [Depends(check_token)]

    @app.get("/patches", dependencies=guarded)
    def list_patches(status: str = "pending") -> list[dict]:
        now = service.clock.now()
        if status == "pending":
            items = store.pending()
        elif status == "all":
            items = store.all_items()
        elif status == "decided":
            items = [i for i in store.all_items() if i.verdict != "pending"]
        else:
            raise HTTPException(status_code=400, detail=f"unknown status {status!r}")
        return [_item_view(item, service, now) for item in items]

    @app.get("/patches/{patch_id}", dependencies=guarded)
    def get_patch(patch_id: str) -> dict:
        found = store.get(patch_id)
        if found is None:
            raise HTTPException(status_code=404, detail=f"no patch {patch_id}")
        item, build_payload = found
        view = _item_view(item, service, service.clock.now())
        view["build"] = dict(build_payload) if build_payload else None
        return view

    @app.post("/patches/{patch_id}/verdict", dependencies=guarded)
    def post_verdict(patch_id: str, request: VerdictRequest) -> dict:
        try:
            record = store.post_verdict(patch_id, request.verdict,
                                        request.analyst_id, request.note)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no patch {patch_id}")
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except TriageConflict as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return record.to_payload()

    @app.post("/patches/{patch_id}/propose", dependencies=guarded)
    def post_propose(patch_id: str, request: ProposeRequest) -> dict:
        try:
            return store.propose(patch_id, request.analyst_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no patch {patch_id}")
        except TriageForbidden as exc:
            raise HTTPException(status_code=403, detail=str(exc))

    @app.get("/stats", dependencies=guarded)
    def get_stats() -> dict:
        stats = store.stats()
        return {
            **stats.to_payload(),
            "pending": len(store.pending()),
        }

    @app.get("/stats/report", dependencies=guarded)
    def get_report(format: str = "doc") -> dict:
        try:
            return {"format": format, "report": export_report(store.stats(), format)}
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.post("/hooks/ci", dependencies=guarded, status_code=202)
    def post_hook(event: HookEvent) -> dict:
        try:
            return service.handle_hook(event.model_dump())
        except HookRejected as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="dashboard")

    return app
