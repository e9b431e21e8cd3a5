"""Stage 1: choose projects worth watching and filter recent builds down to
the interesting ones (CI-failing with at least one identified failing test).

Metadata-first: when the feed already knows the failing-test count we trust
it; parsing the build log is the fallback, and the summary-line grammar is
deliberately minimal because log parsing is fragile.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Optional, Sequence

from .model import BuildRecord, BuildTool, CiStatus, ProjectRef

DEFAULT_WINDOW_HOURS = 4.0

# `Tests run: <int>, Failures: <int>, Errors: <int>, Skipped: <int>` with
# arbitrary surrounding text; the last match in the log wins (real logs end
# with the aggregate line).
_SUMMARY_RE = re.compile(
    r"Tests run: (\d+), Failures: (\d+), Errors: (\d+), Skipped: (\d+)"
)


@dataclass(frozen=True)
class SelectionCriteria:
    min_stars: int = 0
    activity_since: Optional[datetime] = None
    required_language_tag: Optional[str] = None
    required_build_tool: Optional[BuildTool] = None
    require_ci: bool = False

    def __post_init__(self) -> None:
        if self.min_stars < 0:
            raise ValueError("min_stars must be >= 0")

    def admits(self, project: ProjectRef) -> bool:
        if project.stars < self.min_stars:
            return False
        if self.activity_since is not None and project.last_activity < self.activity_since:
            return False
        if self.required_language_tag is not None and project.language_tag != self.required_language_tag:
            return False
        if self.required_build_tool is not None and project.build_tool_tag != self.required_build_tool:
            return False
        if self.require_ci and not project.ci_enabled:
            return False
        return True


@dataclass(frozen=True)
class InterestingBuild:
    build: BuildRecord
    failing_test_count: int
    evidence: str  # "ci_metadata" | "log_parse"

    def __post_init__(self) -> None:
        if self.failing_test_count < 1:
            raise ValueError("an interesting build has >= 1 failing test")


@dataclass(frozen=True)
class TestSummary:
    run: int
    failures: int
    errors: int
    skipped: int

    @property
    def failing(self) -> int:
        return self.failures + self.errors


def select_projects(catalog: Sequence[ProjectRef], criteria: SelectionCriteria) -> list[ProjectRef]:
    """Subset of the catalog satisfying every criterion, input order kept."""
    return [p for p in catalog if criteria.admits(p)]


def parse_test_summary(log: str) -> Optional[TestSummary]:
    """Last summary line in the log, or None. Total: never raises."""
    last = None
    for match in _SUMMARY_RE.finditer(log):
        last = match
    if last is None:
        return None
    run, failures, errors, skipped = (int(g) for g in last.groups())
    return TestSummary(run, failures, errors, skipped)


def is_interesting(
    build: BuildRecord,
    log: str,
    now: datetime,
    window: timedelta = timedelta(hours=DEFAULT_WINDOW_HOURS),
    metadata_failing: Optional[int] = None,
    diagnostics: Optional[list[str]] = None,
) -> Optional[InterestingBuild]:
    """The three-criteria filter: CI-failed, >=1 failing test, fresh.

    Freshness means finished_at in (now - window, now]. Never raises: an
    unparseable log on a failing build records a ``log_opaque`` diagnostic
    and yields None.
    """
    if build.ci_status is not CiStatus.FAILED:
        return None
    if not (now - window < build.finished_at <= now):
        return None
    if metadata_failing is not None and metadata_failing >= 1:
        return InterestingBuild(build, metadata_failing, "ci_metadata")
    summary = parse_test_summary(log)
    if summary is None:
        if diagnostics is not None:
            diagnostics.append(f"log_opaque: build {build.build_id} failed on CI "
                               f"but its log has no test summary")
        return None
    if summary.failing < 1:
        return None
    return InterestingBuild(build, summary.failing, "log_parse")
