from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings, strategies as st

from repairbot.model import BuildRecord, BuildTool, CiStatus, ProjectRef, Trigger
from repairbot.scanner import (
    SelectionCriteria,
    is_interesting,
    parse_test_summary,
    select_projects,
)

TS = datetime(2017, 6, 1, 12, 0, 0, tzinfo=timezone.utc)


def project(slug="acme/thing", stars=100, activity=TS, language="minilang",
            tool=BuildTool.FIXTURE_MINIBUILD, ci=True):
    return ProjectRef(
        host_id=slug, slug=slug, default_branch="main", stars=stars,
        last_activity=activity, language_tag=language, build_tool_tag=tool,
        ci_enabled=ci,
    )


def build(status=CiStatus.FAILED, finished=TS, trigger=Trigger.PUSH):
    return BuildRecord(
        build_id="b1", project=project(), trigger=trigger, commit_id="c" * 7,
        pr_base_commit="base" if trigger is Trigger.PULL_REQUEST else None,
        pr_head_commit="head" if trigger is Trigger.PULL_REQUEST else None,
        ci_status=status, finished_at=finished, log_handle="l",
    )


class TestSelectProjects:
    def test_one_passing_all_criteria(self):
        criteria = SelectionCriteria(
            min_stars=50, activity_since=TS - timedelta(days=30),
            required_language_tag="minilang",
            required_build_tool=BuildTool.FIXTURE_MINIBUILD, require_ci=True,
        )
        catalog = [
            project(slug="low/stars", stars=10),
            project(slug="wrong/lang", language="other"),
            project(slug="stale/proj", activity=TS - timedelta(days=400)),
            project(slug="no/ci", ci=False),
            project(slug="wrong/tool", tool=BuildTool.GRADLE_LIKE),
            project(slug="good/one"),
        ]
        assert [p.slug for p in select_projects(catalog, criteria)] == ["good/one"]

    def test_no_constraints_is_identity(self):
        catalog = [project(slug=f"p/{i}", stars=i) for i in range(5)]
        assert select_projects(catalog, SelectionCriteria(min_stars=0)) == catalog

    def test_order_preserved(self):
        catalog = [project(slug="z/z", stars=5), project(slug="a/a", stars=500)]
        picked = select_projects(catalog, SelectionCriteria(min_stars=1))
        assert [p.slug for p in picked] == ["z/z", "a/a"]

    def test_ci_share_matches_catalog_proportions(self):
        # catalog modeled on the observed tool-usage proportions:
        # 2214 of 10000 projects are CI-enabled -> selectivity 22.14%
        catalog = [project(slug=f"p/{i}", ci=(i < 2214)) for i in range(10000)]
        picked = select_projects(catalog, SelectionCriteria(require_ci=True))
        assert len(picked) == 2214
        assert round(100 * len(picked) / len(catalog), 2) == 22.14

    def test_min_stars_negative_rejected(self):
        with pytest.raises(ValueError):
            SelectionCriteria(min_stars=-1)


class TestParseTestSummary:
    def test_grammar_hand_checked(self):
        summary = parse_test_summary("Tests run: 7, Failures: 1, Errors: 0, Skipped: 0")
        assert (summary.run, summary.failures, summary.errors, summary.skipped) == (7, 1, 0, 0)
        assert summary.failing == 1

    def test_last_match_wins(self):
        log = (
            "module a\nTests run: 3, Failures: 1, Errors: 0, Skipped: 0\n"
            "module b\nTests run: 12, Failures: 2, Errors: 1, Skipped: 1\n"
        )
        summary = parse_test_summary(log)
        assert (summary.run, summary.failures, summary.errors) == (12, 2, 1)
        assert summary.failing == 3

    def test_empty_log(self):
        assert parse_test_summary("") is None

    def test_surrounding_text_allowed(self):
        line = "[ERROR] 12:01:33 Tests run: 5, Failures: 4, Errors: 0, Skipped: 1 -- in suite X"
        assert parse_test_summary(line).failures == 4

    @settings(max_examples=300, deadline=None)
    @given(st.text(max_size=400))
    def test_total_over_arbitrary_text(self, log):
        result = parse_test_summary(log)
        if result is not None:
            assert result.run >= 0


class TestIsInteresting:
    def test_passing_build_absent(self):
        assert is_interesting(build(status=CiStatus.PASSED), "Tests run: 1, Failures: 1, Errors: 0, Skipped: 0", TS) is None

    def test_errored_and_canceled_are_not_candidates(self):
        for status in (CiStatus.ERRORED, CiStatus.CANCELED):
            assert is_interesting(build(status=status), "Tests run: 1, Failures: 1, Errors: 0, Skipped: 0", TS) is None

    def test_failing_build_with_summary_in_window(self):
        log = "some text\nTests run: 12, Failures: 2, Errors: 0, Skipped: 1\n"
        hit = is_interesting(build(), log, TS)
        assert hit is not None
        assert hit.failing_test_count == 2
        assert hit.evidence == "log_parse"

    def test_checkstyle_only_failure_absent(self):
        log = "[ERROR] checkstyle: 14 violations found\nBUILD FAILURE\n"
        diagnostics = []
        assert is_interesting(build(), log, TS, diagnostics=diagnostics) is None
        assert diagnostics and "log_opaque" in diagnostics[0]

    def test_zero_failures_summary_absent(self):
        log = "Tests run: 12, Failures: 0, Errors: 0, Skipped: 0"
        assert is_interesting(build(), log, TS) is None

    def test_metadata_preferred_over_log(self):
        hit = is_interesting(build(), "unparseable", TS, metadata_failing=3)
        assert hit is not None
        assert hit.failing_test_count == 3
        assert hit.evidence == "ci_metadata"

    def test_window_is_exclusive_at_start_inclusive_at_now(self):
        window = timedelta(hours=4)
        log = "Tests run: 1, Failures: 1, Errors: 0, Skipped: 0"
        exactly_now = build(finished=TS)
        assert is_interesting(exactly_now, log, TS, window) is not None
        boundary = build(finished=TS - window)
        assert is_interesting(boundary, log, TS, window) is None
        too_old = build(finished=TS - window - timedelta(seconds=1))
        assert is_interesting(too_old, log, TS, window) is None

    @settings(max_examples=60, deadline=None)
    @given(
        hours=st.floats(min_value=0.01, max_value=12),
        shrink=st.floats(min_value=0.0, max_value=1.0),
        age_minutes=st.integers(min_value=0, max_value=800),
    )
    def test_shrinking_window_never_adds_builds(self, hours, shrink, age_minutes):
        log = "Tests run: 2, Failures: 1, Errors: 0, Skipped: 0"
        record = build(finished=TS - timedelta(minutes=age_minutes))
        wide = is_interesting(record, log, TS, timedelta(hours=hours))
        narrow = is_interesting(record, log, TS, timedelta(hours=hours * shrink))
        if narrow is not None:
            assert wide is not None

    def test_never_returns_for_unfailed_ci_regardless_of_log(self):
        log = "Tests run: 9, Failures: 9, Errors: 0, Skipped: 0"
        for status in (CiStatus.PASSED, CiStatus.ERRORED, CiStatus.CANCELED):
            assert is_interesting(build(status=status), log, TS) is None
