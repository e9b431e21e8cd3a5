"""The bot runner: stage wiring (scan -> reproduce -> repair -> archive ->
notify), periodic and hook modes, and the triage store behind the HTTP API.

Per-build artifacts are identical whether a build arrives through a periodic
scan window or a CI hook; duplicate (build, diff) pairs never enqueue twice.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from types import SimpleNamespace
from typing import Callable, Iterable, Mapping, Optional, Protocol, Sequence

from . import gitops
from .archive import Archive, ArchiveRecord, RecordKind, compute_statistics, read_archive
from .diffs import apply_diff, diff_paths
from .feeds import CiFeed, FeedConfigError, FeedError, open_feed
from .model import (
    BuildRecord,
    Outcome,
    ProjectRef,
    RunStatistics,
    Trigger,
    TriageVerdict,
    Verdict,
    allowed_verdict_transition,
    ts_from_str,
    ts_to_str,
    utc_now,
)
from .reproducer import DEFAULT_ADAPTERS, Reproducer, ReproductionAttempt, checkout
from .repair import ToolRegistry, repair_program
from .scanner import InterestingBuild, is_interesting

DEFAULT_INTERVAL = timedelta(hours=4)


class Clock(Protocol):
    def now(self) -> datetime: ...
    def sleep(self, seconds: float) -> None: ...


class SystemClock:
    def now(self) -> datetime:
        return utc_now()

    def sleep(self, seconds: float) -> None:
        _time.sleep(seconds)


@dataclass
class RunConfig:
    feed_locator: str
    archive_path: Path
    workdir: Path
    notify_dir: Optional[Path] = None
    catalog_path: Optional[Path] = None
    interval: timedelta = DEFAULT_INTERVAL
    mode: str = "oneshot"  # periodic | hook | oneshot
    workers: int = 4
    registry: ToolRegistry = field(default_factory=ToolRegistry)
    max_patches: int = 50
    keep_workspaces: bool = False
    api_token: Optional[str] = None

    def __post_init__(self) -> None:
        if self.mode == "periodic" and self.interval <= timedelta(0):
            raise ValueError("periodic mode needs a positive interval")
        self.archive_path = Path(self.archive_path)
        self.workdir = Path(self.workdir)
        if self.notify_dir is None:
            self.notify_dir = self.workdir / "outbox"
        self.notify_dir = Path(self.notify_dir)


def load_catalog(path: Path) -> list[ProjectRef]:
    """Project catalog file: one ProjectRef JSON record per line."""
    projects = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            projects.append(ProjectRef.from_payload(json.loads(line)))
    return projects


def write_catalog(projects: Iterable[ProjectRef], path: Path) -> None:
    lines = [json.dumps(p.to_payload(), sort_keys=True) for p in projects]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def diff_digest(diff: str) -> str:
    return hashlib.sha256(diff.encode("utf-8")).hexdigest()


class HookRejected(ValueError):
    """Malformed hook event (the 400-equivalent)."""


def _build_payload(build: BuildRecord, interesting: bool) -> dict:
    """Archive form of a build: flat project slug for the statistics plus
    the full ProjectRef under project_ref for record reconstruction."""
    payload = build.to_payload()
    payload["project_ref"] = payload["project"]
    payload["project"] = build.project.slug
    payload["interesting"] = interesting
    return payload


def build_from_archive_payload(payload: Mapping) -> BuildRecord:
    return BuildRecord.from_payload({**payload, "project": payload["project_ref"]})


@dataclass
class BuildResult:
    build: BuildRecord
    attempt: ReproductionAttempt
    patch_payloads: list[dict] = field(default_factory=list)


class PipelineService:
    """One service instance owns the archive writer and the worker pool."""

    def __init__(self, config: RunConfig, clock: Optional[Clock] = None,
                 feed: Optional[CiFeed] = None):
        self.config = config
        self.clock = clock or SystemClock()
        self.feed = feed or open_feed(config.feed_locator)
        self.archive = Archive(config.archive_path)
        self.reproducer = Reproducer(
            self.feed, config.workdir / "workspaces",
            keep_all=config.keep_workspaces,
        )
        self.config.notify_dir.mkdir(parents=True, exist_ok=True)
        self._seen_patches: set[tuple[str, str]] = set()
        self._attempted_builds: set[str] = set()
        self._inflight: set[str] = set()
        self._state_lock = threading.Lock()
        for record in read_archive(config.archive_path):
            if record.kind is RecordKind.PATCH:
                payload = record.payload
                self._seen_patches.add((payload["build_id"], diff_digest(payload["edit"])))
            elif record.kind is RecordKind.REPRODUCTION:
                self._attempted_builds.add(record.payload["build_id"])

    # -- stage 1 ----------------------------------------------------------

    def catalog(self) -> list[ProjectRef]:
        if self.config.catalog_path is not None:
            return load_catalog(self.config.catalog_path)
        return self.feed.projects()

    def scan_window(self, window_start: datetime, window_end: datetime
                    ) -> tuple[list[BuildRecord], list[InterestingBuild], list[str]]:
        slugs = {p.slug for p in self.catalog()}
        builds = [b for b in self.feed.list_recent_builds(window_start, window_end)
                  if b.project.slug in slugs]
        interesting: list[InterestingBuild] = []
        diagnostics: list[str] = []
        for build in builds:
            try:
                log = self.feed.fetch_log(build.build_id)
            except FeedError as exc:
                diagnostics.append(f"log fetch failed for {build.build_id}: {exc}")
                continue
            hit = is_interesting(
                build, log,
                now=window_end,
                window=window_end - window_start,
                metadata_failing=self.feed.failing_test_hint(build.build_id),
                diagnostics=diagnostics,
            )
            if hit is not None:
                interesting.append(hit)
        return builds, interesting, diagnostics

    # -- per-build pipeline ------------------------------------------------

    def process_build(self, hit: InterestingBuild) -> BuildResult:
        """Reproduce, repair, archive, notify: the mode-independent path."""
        build = hit.build
        attempt = self.reproducer.reproduce(build)
        self.archive.append(RecordKind.REPRODUCTION, {
            **attempt.result.to_payload(),
            "attempt_started_at": ts_to_str(attempt.started_at),
            "build_finished_at": ts_to_str(build.finished_at),
            "diagnostics": attempt.diagnostics,
        })
        with self._state_lock:
            self._attempted_builds.add(build.build_id)
        patch_payloads: list[dict] = []
        if attempt.result.outcome is Outcome.REPRODUCED and attempt.workspace is not None:
            adapter = self.reproducer.adapters.get(build.project.build_tool_tag)
            program = adapter.load_program(attempt.workspace)
            outcome = repair_program(
                program,
                build_id=build.build_id,
                registry=self.config.registry,
                workspace=attempt.workspace,
                max_patches=self.config.max_patches,
            )
            for patch in outcome.patches:
                payload = {
                    **patch.candidate.to_payload(),
                    "project": build.project.slug,
                    "note": patch.note,
                    "build_finished_at": ts_to_str(build.finished_at),
                    "attempt_started_at": ts_to_str(attempt.started_at),
                }
                key = (build.build_id, diff_digest(patch.candidate.edit))
                with self._state_lock:
                    if key in self._seen_patches:
                        continue
                    self._seen_patches.add(key)
                self.archive.append(RecordKind.PATCH, payload)
                patch_payloads.append(payload)
                if patch.candidate.adequate:
                    self._notify(payload)
            manifest = self.reproducer.release(attempt)
            if manifest is not None:
                manifest_dir = self.config.workdir / "manifests"
                manifest_dir.mkdir(parents=True, exist_ok=True)
                (manifest_dir / f"{attempt.result.workspace_id}.json").write_text(
                    json.dumps(manifest, indent=2, sort_keys=True))
        return BuildResult(build, attempt, patch_payloads)

    def _notify(self, patch_payload: dict) -> None:
        """File-based stand-in for mailing the patch analyst."""
        message = {
            "to": "patch-analyst",
            "subject": f"candidate patch {patch_payload['patch_id']} "
                       f"for {patch_payload['project']}",
            "patch_id": patch_payload["patch_id"],
            "build_id": patch_payload["build_id"],
            "tool": patch_payload["tool_name"],
            "flags": patch_payload["overfitting_flags"],
            "diff": patch_payload["edit"],
        }
        path = self.config.notify_dir / f"{patch_payload['patch_id']}.json"
        path.write_text(json.dumps(message, indent=2, sort_keys=True))

    # -- runs ---------------------------------------------------------------

    def run_once(self, window_start: datetime, window_end: datetime,
                 run_id: Optional[str] = None) -> RunStatistics:
        """One full pass over a scan window; archives everything it sees."""
        run_id = run_id or f"run-{ts_to_str(window_start)}"
        builds, interesting, diagnostics = self.scan_window(window_start, window_end)
        interesting_ids = {hit.build.build_id for hit in interesting}
        for build in builds:
            self.archive.append(RecordKind.BUILD, _build_payload(
                build, interesting=build.build_id in interesting_ids))
        # no interesting build is processed twice within one run
        unique: dict[str, InterestingBuild] = {}
        for hit in interesting:
            unique.setdefault(hit.build.build_id, hit)
        results: list[BuildResult] = []
        if unique:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                results = list(pool.map(self.process_build, unique.values()))
        stats = self._stats_for(run_id, window_start, window_end, builds,
                                list(unique.values()), results)
        self.archive.append(RecordKind.RUN, {**stats.to_payload(), "status": "ok",
                                             "diagnostics": diagnostics})
        return stats

    def _stats_for(self, run_id: str, window_start: datetime, window_end: datetime,
                   builds: Sequence[BuildRecord], interesting: Sequence[InterestingBuild],
                   results: Sequence[BuildResult]) -> RunStatistics:
        outcomes = {bucket.value: 0 for bucket in Outcome}
        per_project: dict[str, dict[str, int]] = {}
        per_signature: dict[str, int] = {}
        patches_found = 0

        def bump(slug: str, key: str, by: int = 1) -> None:
            per_project.setdefault(slug, {})
            per_project[slug][key] = per_project[slug].get(key, 0) + by

        interesting_ids = {hit.build.build_id for hit in interesting}
        for build in builds:
            bump(build.project.slug, "builds")
            if build.ci_status.value == "failed":
                bump(build.project.slug, "ci_failing")
            if build.build_id in interesting_ids:
                bump(build.project.slug, "interesting")
                if build.trigger is Trigger.PULL_REQUEST:
                    bump(build.project.slug, "pr_interesting")
        for result in results:
            slug = result.build.project.slug
            outcomes[result.attempt.result.outcome.value] += 1
            if result.attempt.result.outcome is Outcome.REPRODUCED:
                bump(slug, "reproduced")
            for signature in result.attempt.result.signatures:
                name = signature.exception_type
                per_signature[name] = per_signature.get(name, 0) + 1
            adequate = [p for p in result.patch_payloads if p["adequate"]]
            patches_found += len(adequate)
            if adequate:
                bump(slug, "builds_with_patches")
                bump(slug, "patches", by=len(adequate))
                for payload in adequate:
                    bump(slug, f"patches:{payload['tool_name']}")
        return RunStatistics(
            run_id=run_id,
            window_start=window_start,
            window_end=window_end,
            builds_collected=len(builds),
            ci_failing=sum(1 for b in builds if b.ci_status.value == "failed"),
            interesting=len(interesting),
            outcomes=outcomes,
            patches_found=patches_found,
            per_project=per_project,
            per_signature=per_signature,
        )

    def run_periodic(self, stop: Optional[threading.Event] = None,
                     max_windows: Optional[int] = None) -> int:
        """Back-to-back windows partition time; a feed failure archives a
        feed-error run record and backs off exponentially."""
        stop = stop or threading.Event()
        interval = self.config.interval
        window_end = self.clock.now()
        window_start = window_end - interval
        delay = interval.total_seconds()
        ran = 0
        while not stop.is_set():
            try:
                self.run_once(window_start, window_end)
                delay = interval.total_seconds()
            except (FeedError, FeedConfigError) as exc:
                self.archive.append(RecordKind.RUN, {
                    "run_id": f"run-{ts_to_str(window_start)}",
                    "window_start": ts_to_str(window_start),
                    "window_end": ts_to_str(window_end),
                    "builds_collected": 0, "ci_failing": 0, "interesting": 0,
                    "outcomes": {}, "patches_found": 0,
                    "status": "feed_error", "error": str(exc),
                })
                delay = min(delay * 2, interval.total_seconds() * 8)
            ran += 1
            if max_windows is not None and ran >= max_windows:
                break
            window_start, window_end = window_end, window_end + interval
            if stop.is_set():
                break
            self.clock.sleep(delay)
        return ran

    # -- hook mode ----------------------------------------------------------

    def handle_hook(self, event: Mapping) -> dict:
        """Build-finished notification: failed builds trigger an immediate
        oneshot, idempotent per build_id; everything else is ignored."""
        if not isinstance(event, Mapping) or event.get("event") != "build_finished":
            raise HookRejected("expected a build_finished event document")
        build_id = event.get("build_id")
        status = event.get("status")
        if not isinstance(build_id, str) or not build_id or not isinstance(status, str):
            raise HookRejected("event needs string build_id and status")
        if status != "failed":
            return {"status": "ignored", "reason": f"build status {status!r}"}
        with self._state_lock:
            if build_id in self._attempted_builds or build_id in self._inflight:
                return {"status": "accepted", "build_id": build_id, "duplicate": True}
            self._inflight.add(build_id)
        try:
            try:
                build = self.feed.build(build_id)
                log = self.feed.fetch_log(build_id)
            except FeedError as exc:
                raise HookRejected(f"unknown build {build_id}: {exc}") from exc
            hit = is_interesting(
                build, log,
                now=build.finished_at,  # hook arrivals are fresh by definition
                window=self.config.interval,
                metadata_failing=self.feed.failing_test_hint(build_id),
            )
            if hit is None:
                return {"status": "ignored", "reason": "no failing test identified"}
            self.archive.append(RecordKind.BUILD, _build_payload(build, interesting=True))
            result = self.process_build(hit)
            return {
                "status": "accepted",
                "build_id": build_id,
                "outcome": result.attempt.result.outcome.value,
                "patches": len(result.patch_payloads),
            }
        finally:
            with self._state_lock:
                self._inflight.discard(build_id)

    def close(self) -> None:
        self.archive.close()


# -- triage ----------------------------------------------------------------


@dataclass(frozen=True)
class QueueItem:
    seq: int
    payload: Mapping
    verdict: str  # latest verdict value, "pending" if none

    @property
    def patch_id(self) -> str:
        return self.payload["patch_id"]

    def flag_count(self) -> int:
        return len([f for f in self.payload["overfitting_flags"] if f != "none"])


class TriageConflict(Exception):
    pass


class TriageForbidden(Exception):
    pass


class TriageStore:
    """Read side of the archive plus verdict/proposal writes.

    State is re-derived from the archive on each read, so the store is
    always consistent with what the pipeline has durably written.
    """

    def __init__(self, archive: Archive, feed: CiFeed, proposals_dir: Path,
                 clock: Optional[Clock] = None):
        self.archive = archive
        self.feed = feed
        self.proposals_dir = Path(proposals_dir)
        self.clock = clock or SystemClock()
        self._write_lock = threading.Lock()

    def _scan(self) -> tuple[dict[str, QueueItem], dict[str, Mapping]]:
        patches: dict[str, QueueItem] = {}
        builds: dict[str, Mapping] = {}
        verdicts: dict[str, str] = {}
        for record in self.archive.records():
            if record.kind is RecordKind.PATCH and record.payload.get("adequate"):
                patches[record.payload["patch_id"]] = QueueItem(
                    record.seq, record.payload, "pending")
            elif record.kind is RecordKind.VERDICT:
                verdicts[record.payload["patch_id"]] = record.payload["verdict"]
            elif record.kind is RecordKind.BUILD:
                builds[record.payload["build_id"]] = record.payload
        resolved = {
            pid: QueueItem(item.seq, item.payload, verdicts.get(pid, "pending"))
            for pid, item in patches.items()
        }
        return resolved, builds

    def pending(self) -> list[QueueItem]:
        patches, _ = self._scan()
        queue = [item for item in patches.values() if item.verdict == "pending"]
        queue.sort(key=lambda item: (item.flag_count(),
                                     ts_from_str(item.payload["created_at"]),
                                     item.seq))
        return queue

    def all_items(self) -> list[QueueItem]:
        patches, _ = self._scan()
        return sorted(patches.values(), key=lambda item: item.seq)

    def get(self, patch_id: str) -> Optional[tuple[QueueItem, Optional[Mapping]]]:
        patches, builds = self._scan()
        item = patches.get(patch_id)
        if item is None:
            return None
        return item, builds.get(item.payload["build_id"])

    def post_verdict(self, patch_id: str, verdict: str, analyst_id: str,
                     note: str = "") -> TriageVerdict:
        new_verdict = Verdict(verdict)
        with self._write_lock:
            patches, _ = self._scan()
            item = patches.get(patch_id)
            if item is None:
                raise KeyError(patch_id)
            if not allowed_verdict_transition(Verdict(item.verdict), new_verdict):
                raise TriageConflict(
                    f"patch {patch_id} is {item.verdict}, not pending")
            record = TriageVerdict(
                patch_id=patch_id,
                verdict=new_verdict,
                analyst_id=analyst_id,
                note=note,
                decided_at=self.clock.now(),
            )
            self.archive.append(RecordKind.VERDICT, record.to_payload())
            return record

    def propose(self, patch_id: str, analyst_id: str = "") -> dict:
        """Create the proposal branch in a fresh clone of the target repo
        with the diff applied, plus a description document."""
        with self._write_lock:
            patches, builds = self._scan()
            item = patches.get(patch_id)
            if item is None:
                raise KeyError(patch_id)
            if item.verdict != Verdict.CORRECT.value:
                raise TriageForbidden(
                    f"propose requires verdict=correct, patch is {item.verdict}")
            build_payload = builds.get(item.payload["build_id"])
            if build_payload is None:
                raise TriageForbidden("no archived build context for this patch")
            build = build_from_archive_payload(build_payload)
            workdir = self.proposals_dir / patch_id
            clone_dir = workdir / "repo"
            if clone_dir.exists():
                return self._proposal_doc(item, workdir)  # idempotent
            workdir.mkdir(parents=True, exist_ok=True)
            shim = SimpleNamespace(source_dir=clone_dir)  # checkout touches only source_dir
            steps = checkout(build, self.feed.repo_locator(build.build_id), shim)
            if any(step.status.value != "ok" for step in steps):
                raise TriageForbidden(f"cannot restore build tree: {steps[-1].detail}")
            diff = item.payload["edit"]
            touched = diff_paths(diff)
            originals = {p: (clone_dir / p).read_text() for p in touched}
            patched = apply_diff(diff, originals)
            branch = f"repair/{patch_id}"
            gitops.run_git(["checkout", "-q", "-b", branch], cwd=clone_dir)
            for rel, text in patched.items():
                (clone_dir / rel).write_text(text)
            gitops.run_git(["commit", "-q", "-am",
                            f"proposed fix for build {build.build_id}"], cwd=clone_dir)
            description = {
                "patch_id": patch_id,
                "build_id": build.build_id,
                "project": item.payload["project"],
                "tool": item.payload["tool_name"],
                "branch": branch,
                "analyst": analyst_id,
                "proposed_at": ts_to_str(self.clock.now()),
                "diff": diff,
            }
            (clone_dir / "PROPOSAL.md").write_text(
                "# Proposed fix\n\n"
                f"- patch: {patch_id}\n- build: {build.build_id}\n"
                f"- tool: {item.payload['tool_name']}\n- branch: {branch}\n\n"
                "```diff\n" + diff + "```\n")
            (workdir / "proposal.json").write_text(
                json.dumps(description, indent=2, sort_keys=True))
            return self._proposal_doc(item, workdir)

    def _proposal_doc(self, item: QueueItem, workdir: Path) -> dict:
        return {
            "patch_id": item.patch_id,
            "branch": f"repair/{item.patch_id}",
            "clone": str(workdir / "repo"),
            "description": str(workdir / "proposal.json"),
        }

    def stats(self) -> RunStatistics:
        return compute_statistics(self.archive.records(), run_id="cumulative")
