"""Uniform access to a CI feed and its code hosting.

Two backends: the fixture feed (a directory holding ``feed.manifest``,
stored build logs, and ordinary local git repositories) used by every test,
and a live-HTTP skeleton that maps the same record shapes but has never been
pointed at a real service.

Window convention everywhere here: start-inclusive, end-exclusive, so
back-to-back scheduler windows partition time.
"""

from __future__ import annotations

import json
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

from . import gitops
from .model import BuildRecord, ProjectRef, Trigger, ts_from_str, ts_to_str

MANIFEST_NAME = "feed.manifest"


class FeedError(RuntimeError):
    """Transient backend trouble; retryable."""


class FeedConfigError(ValueError):
    """Broken feed definition; fatal."""


class CommitUnresolvable(RuntimeError):
    """The build's commit no longer exists (amended or deleted)."""


@dataclass(frozen=True)
class ResolvedCommit:
    kind: Trigger
    commit: Optional[str] = None  # push builds
    base: Optional[str] = None  # pull-request builds
    head: Optional[str] = None


class CiFeed(Protocol):
    def list_recent_builds(self, start: datetime, end: datetime) -> list[BuildRecord]: ...
    def fetch_log(self, build_id: str) -> str: ...
    def resolve_commit(self, build: BuildRecord) -> ResolvedCommit: ...
    def projects(self) -> list[ProjectRef]: ...
    def build(self, build_id: str) -> BuildRecord: ...
    def repo_locator(self, build_id: str) -> str: ...
    def failing_test_hint(self, build_id: str) -> Optional[int]: ...


def _window_ok(start: datetime, end: datetime) -> None:
    if not start < end:
        if start == end:
            return  # degenerate interval: legal, selects nothing
        raise ValueError(f"window start {start} after end {end}")


class FixtureFeed:
    """Deterministic feed over local directories and git repositories."""

    def __init__(self, root: Path):
        self.root = Path(root)
        manifest_path = self.root / MANIFEST_NAME
        if not manifest_path.is_file():
            raise FeedConfigError(f"no {MANIFEST_NAME} under {self.root}")
        try:
            manifest = json.loads(manifest_path.read_text())
        except json.JSONDecodeError as exc:
            raise FeedConfigError(f"{manifest_path}: {exc}") from exc
        self._projects = [ProjectRef.from_payload(p) for p in _require(manifest, "projects", list)]
        by_slug = {p.slug: p for p in self._projects}
        self._builds: dict[str, BuildRecord] = {}
        self._meta: dict[str, dict] = {}
        self._order: list[str] = []
        for entry in _require(manifest, "builds", list):
            slug = _require(entry, "project", str)
            if slug not in by_slug:
                raise FeedConfigError(f"build {entry.get('build_id')} references unknown project {slug}")
            record = BuildRecord.from_payload({**entry, "project": by_slug[slug].to_payload(),
                                               "log_handle": entry["log"]})
            log_path = self.root / entry["log"]
            if not log_path.is_file():
                raise FeedConfigError(f"build {record.build_id}: missing log file {log_path}")
            if record.build_id in self._builds:
                raise FeedConfigError(f"duplicate build_id {record.build_id}")
            self._builds[record.build_id] = record
            self._meta[record.build_id] = entry
            self._order.append(record.build_id)

    # -- feed protocol --

    def projects(self) -> list[ProjectRef]:
        return list(self._projects)

    def list_recent_builds(self, start: datetime, end: datetime) -> list[BuildRecord]:
        _window_ok(start, end)
        hits = [self._builds[b] for b in self._order
                if start <= self._builds[b].finished_at < end]
        hits.sort(key=lambda b: b.finished_at)  # stable: manifest order breaks ties
        return hits

    def fetch_log(self, build_id: str) -> str:
        meta = self._meta.get(build_id)
        if meta is None:
            raise FeedError(f"unknown build {build_id}")
        return (self.root / meta["log"]).read_text()

    def build(self, build_id: str) -> BuildRecord:
        try:
            return self._builds[build_id]
        except KeyError:
            raise FeedError(f"unknown build {build_id}") from None

    def resolve_commit(self, build: BuildRecord) -> ResolvedCommit:
        repo = Path(self.repo_locator(build.build_id))
        def check(sha: str) -> None:
            if repo.is_dir() and not gitops.commit_exists(repo, sha):
                raise CommitUnresolvable(f"commit {sha} not in {repo}")
        if build.trigger is Trigger.PULL_REQUEST:
            check(build.pr_base_commit)
            check(build.pr_head_commit)
            return ResolvedCommit(Trigger.PULL_REQUEST, base=build.pr_base_commit,
                                  head=build.pr_head_commit)
        check(build.commit_id)
        return ResolvedCommit(Trigger.PUSH, commit=build.commit_id)

    def repo_locator(self, build_id: str) -> str:
        meta = self._meta.get(build_id)
        if meta is None:
            raise FeedError(f"unknown build {build_id}")
        return str(self.root / meta["repo"])

    def failing_test_hint(self, build_id: str) -> Optional[int]:
        value = self._meta.get(build_id, {}).get("failing_tests")
        return int(value) if value is not None else None

    def ci_merge_tree(self, build_id: str) -> Optional[str]:
        """Tree hash of the merge the CI built, pre-recorded when the
        pull-request fixture was authored."""
        return self._meta.get(build_id, {}).get("ci_merge_tree")


def _require(mapping, key: str, kind: type):
    try:
        value = mapping[key]
    except (KeyError, TypeError):
        raise FeedConfigError(f"manifest missing {key!r}") from None
    if not isinstance(value, kind):
        raise FeedConfigError(f"manifest field {key!r} must be {kind.__name__}")
    return value


class LiveFeed:
    """HTTP skeleton for a hosted CI service.

    Maps only the BuildRecord fields; retries transient errors 3 times with
    exponential backoff. Untested against real services.
    """

    RETRIES = 3

    def __init__(self, base_url: str, token: Optional[str] = None,
                 fetch_json: Optional[Callable[[str], object]] = None,
                 sleeper: Callable[[float], None] = time.sleep):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self._fetch_json = fetch_json or self._http_json
        self._sleep = sleeper

    def _http_json(self, url: str):
        request = urllib.request.Request(url)
        if self.token:
            request.add_header("Authorization", f"token {self.token}")
        with urllib.request.urlopen(request, timeout=30) as response:
            return json.loads(response.read().decode("utf-8"))

    def _get(self, url: str):
        delay = 1.0
        for attempt in range(self.RETRIES):
            try:
                return self._fetch_json(url)
            except (urllib.error.URLError, OSError, FeedError) as exc:
                if attempt == self.RETRIES - 1:
                    raise FeedError(f"GET {url}: {exc}") from exc
                self._sleep(delay)
                delay *= 2

    def projects(self) -> list[ProjectRef]:
        data = self._get(f"{self.base_url}/projects")
        return [ProjectRef.from_payload(p) for p in data]

    def list_recent_builds(self, start: datetime, end: datetime) -> list[BuildRecord]:
        _window_ok(start, end)
        url = f"{self.base_url}/builds?since={ts_to_str(start)}&until={ts_to_str(end)}"
        records = [BuildRecord.from_payload(b) for b in self._get(url)]
        return sorted(
            (b for b in records if start <= b.finished_at < end),
            key=lambda b: b.finished_at,
        )

    def fetch_log(self, build_id: str) -> str:
        data = self._get(f"{self.base_url}/logs/{build_id}")
        if not isinstance(data, str):
            raise FeedError(f"log endpoint for {build_id} returned non-text")
        return data

    def build(self, build_id: str) -> BuildRecord:
        return BuildRecord.from_payload(self._get(f"{self.base_url}/builds/{build_id}"))

    def resolve_commit(self, build: BuildRecord) -> ResolvedCommit:
        if build.trigger is Trigger.PULL_REQUEST:
            return ResolvedCommit(Trigger.PULL_REQUEST, base=build.pr_base_commit,
                                  head=build.pr_head_commit)
        return ResolvedCommit(Trigger.PUSH, commit=build.commit_id)

    def repo_locator(self, build_id: str) -> str:
        return f"{self.base_url}/repos/{build_id}"

    def failing_test_hint(self, build_id: str) -> Optional[int]:
        return None


def open_feed(locator: str, token: Optional[str] = None) -> CiFeed:
    if locator.startswith(("http://", "https://")):
        return LiveFeed(locator, token)
    return FixtureFeed(Path(locator))
