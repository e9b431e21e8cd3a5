from __future__ import annotations

from datetime import datetime, timezone

import pytest
from hypothesis import given, strategies as st

from repairbot.model import (
    BuildRecord,
    BuildTool,
    CiStatus,
    ContractViolation,
    FailureSignature,
    Outcome,
    ProjectRef,
    ReproductionResult,
    RunStatistics,
    STEP_ORDER,
    SignatureParseError,
    Step,
    StepResult,
    StepStatus,
    Trigger,
    Verdict,
    allowed_verdict_transition,
    classify_outcome,
    extract_signature,
    ts_from_str,
    ts_to_str,
)

TS = datetime(2017, 6, 1, tzinfo=timezone.utc)


def make_trace(fail_at: int | None, failing_tests: int = 0) -> list[StepResult]:
    """A well-formed five-step trace failing at index fail_at (None = all ok)."""
    steps = []
    for i, step in enumerate(STEP_ORDER):
        if fail_at is None or i < fail_at:
            status = StepStatus.OK
        elif i == fail_at:
            status = StepStatus.FAILED
        else:
            status = StepStatus.SKIPPED
        kwargs = {}
        if step is Step.OBSERVE and status is StepStatus.OK:
            kwargs["failing_tests"] = failing_tests
        steps.append(StepResult(step, status, **kwargs))
    return steps


class TestClassifyOutcome:
    def test_clone_failure_wins(self):
        assert classify_outcome(make_trace(0)) is Outcome.CLONE_ERROR

    def test_all_ok_no_failing_tests_is_not_reproduced(self):
        assert classify_outcome(make_trace(None, failing_tests=0)) is Outcome.NOT_REPRODUCED

    def test_all_ok_with_failing_tests_is_reproduced(self):
        assert classify_outcome(make_trace(None, failing_tests=2)) is Outcome.REPRODUCED

    def test_harness_crash_after_compile(self):
        assert classify_outcome(make_trace(3)) is Outcome.HARNESS_ERROR

    def test_observe_failure_is_harness_error(self):
        assert classify_outcome(make_trace(4)) is Outcome.HARNESS_ERROR

    def test_checkout_and_compile_buckets(self):
        assert classify_outcome(make_trace(1)) is Outcome.CHECKOUT_ERROR
        assert classify_outcome(make_trace(2)) is Outcome.COMPILE_ERROR

    def test_missing_step_is_contract_violation(self):
        with pytest.raises(ContractViolation):
            classify_outcome(make_trace(None, 1)[:4])

    def test_misordered_steps_rejected(self):
        trace = make_trace(None, 1)
        trace[0], trace[1] = trace[1], trace[0]
        with pytest.raises(ContractViolation):
            classify_outcome(trace)

    def test_skip_without_failure_rejected(self):
        trace = make_trace(None, 1)
        trace[2] = StepResult(Step.COMPILE, StepStatus.SKIPPED)
        with pytest.raises(ContractViolation):
            classify_outcome(trace)

    def test_observe_ok_needs_count(self):
        trace = make_trace(None, 1)
        trace[4] = StepResult(Step.OBSERVE, StepStatus.OK)
        with pytest.raises(ContractViolation):
            classify_outcome(trace)

    @given(
        fail_at=st.one_of(st.none(), st.integers(min_value=0, max_value=4)),
        failing=st.integers(min_value=0, max_value=20),
    )
    def test_partition_exactly_one_bucket(self, fail_at, failing):
        outcome = classify_outcome(make_trace(fail_at, failing))
        assert isinstance(outcome, Outcome)

    @given(
        fail_at=st.integers(min_value=1, max_value=4),
        earlier=st.integers(min_value=0, max_value=3),
    )
    def test_earlier_failure_shadows_later(self, fail_at, earlier):
        if earlier >= fail_at:
            earlier = fail_at - 1
        trace = make_trace(fail_at)
        shadowed = list(trace)
        shadowed[earlier] = StepResult(STEP_ORDER[earlier], StepStatus.FAILED)
        for i in range(earlier + 1, len(shadowed)):
            shadowed[i] = StepResult(STEP_ORDER[i], StepStatus.SKIPPED)
        first = classify_outcome(shadowed)
        assert first is classify_outcome(make_trace(earlier))


class TestExtractSignature:
    def test_assertion_error_with_detail(self):
        sig = extract_signature("java.lang.AssertionError: expected 1")
        assert sig.exception_type == "java.lang.AssertionError"
        assert sig.detail == "expected 1"

    def test_npe_without_detail(self):
        sig = extract_signature("java.lang.NullPointerException")
        assert sig.exception_type == "java.lang.NullPointerException"
        assert sig.detail == ""

    def test_minilang_null_deref_head_token(self):
        sig = extract_signature("NullDeref: field f of null at line 7")
        assert sig.exception_type == "NullDeref"
        assert sig.detail == "field f of null at line 7"

    def test_empty_text_is_parse_error(self):
        with pytest.raises(SignatureParseError):
            extract_signature("")

    def test_whitespace_head_is_parse_error(self):
        with pytest.raises(SignatureParseError):
            extract_signature("some words without a type")

    def test_multiline_trace_uses_first_line(self):
        sig = extract_signature("AssertFail: boom\n    at test_x (stmt 3)")
        assert sig.exception_type == "AssertFail"
        assert sig.detail == "boom"

    @given(
        head=st.from_regex(r"[A-Za-z][A-Za-z0-9_.]{0,30}", fullmatch=True),
        detail=st.text(
            alphabet=st.characters(blacklist_categories=("Cs", "Cc")), max_size=40
        ).map(str.strip),
    )
    def test_round_trip_reconstruction(self, head, detail):
        line = f"{head}: {detail}" if detail else head
        sig = extract_signature(line)
        assert sig.head_line() == line


def project(**overrides) -> ProjectRef:
    base = dict(
        host_id="h1", slug="acme/calc", default_branch="main", stars=10,
        last_activity=TS, language_tag="minilang",
        build_tool_tag=BuildTool.FIXTURE_MINIBUILD, ci_enabled=True,
    )
    base.update(overrides)
    return ProjectRef(**base)


class TestDomainTypes:
    def test_slug_needs_single_separator(self):
        with pytest.raises(ValueError):
            project(slug="acme")
        with pytest.raises(ValueError):
            project(slug="a/b/c")

    def test_negative_stars_rejected(self):
        with pytest.raises(ValueError):
            project(stars=-1)

    def test_pr_build_needs_both_commits(self):
        with pytest.raises(ValueError):
            BuildRecord(
                build_id="b1", project=project(), trigger=Trigger.PULL_REQUEST,
                commit_id="c", pr_base_commit="base", pr_head_commit=None,
                ci_status=CiStatus.FAILED, finished_at=TS, log_handle="l",
            )

    def test_push_build_must_not_carry_pr_commits(self):
        with pytest.raises(ValueError):
            BuildRecord(
                build_id="b1", project=project(), trigger=Trigger.PUSH,
                commit_id="c", pr_base_commit="base", pr_head_commit="head",
                ci_status=CiStatus.FAILED, finished_at=TS, log_handle="l",
            )

    def test_build_record_payload_round_trip(self):
        record = BuildRecord(
            build_id="b7", project=project(), trigger=Trigger.PULL_REQUEST,
            commit_id="c", pr_base_commit="base", pr_head_commit="head",
            ci_status=CiStatus.FAILED, finished_at=TS, log_handle="logs/b7.log",
        )
        assert BuildRecord.from_payload(record.to_payload()) == record

    def test_signature_rejects_whitespace_type(self):
        with pytest.raises(ValueError):
            FailureSignature("two words", "t", "")

    def test_reproduced_iff_failing(self):
        build = BuildRecord(
            build_id="b", project=project(), trigger=Trigger.PUSH, commit_id="c",
            pr_base_commit=None, pr_head_commit=None, ci_status=CiStatus.FAILED,
            finished_at=TS, log_handle="l",
        )
        with pytest.raises(ValueError):
            ReproductionResult(build, Outcome.REPRODUCED, 3, 0, (), 0.1, "ws")
        with pytest.raises(ValueError):
            ReproductionResult(build, Outcome.NOT_REPRODUCED, 3, 1, (), 0.1, "ws")
        with pytest.raises(ValueError):
            ReproductionResult(build, Outcome.CLONE_ERROR, 3, 0, (), 0.1, "ws")

    def test_verdict_transitions_forward_only(self):
        assert allowed_verdict_transition(Verdict.PENDING, Verdict.CORRECT)
        assert allowed_verdict_transition(Verdict.PENDING, Verdict.OVERFITTING)
        assert not allowed_verdict_transition(Verdict.CORRECT, Verdict.OVERFITTING)
        assert not allowed_verdict_transition(Verdict.CORRECT, Verdict.PENDING)
        assert not allowed_verdict_transition(Verdict.PENDING, Verdict.PENDING)

    def test_run_statistics_funnel_invariant(self):
        with pytest.raises(ValueError):
            RunStatistics("r", TS, TS, builds_collected=1, ci_failing=2, interesting=0)
        with pytest.raises(ValueError):
            RunStatistics("r", TS, TS, builds_collected=5, ci_failing=2, interesting=3)

    def test_run_statistics_rejects_unknown_bucket(self):
        with pytest.raises(ValueError):
            RunStatistics("r", TS, TS, outcomes={"weird": 1})

    def test_timestamps_normalized_to_utc_seconds(self):
        raw = "2017-06-01T05:30:00.123456+02:00"
        ts = ts_from_str(raw)
        assert ts.tzinfo == timezone.utc
        assert ts.microsecond == 0
        assert ts_to_str(ts) == "2017-06-01T03:30:00+00:00"
        assert ts_from_str("2017-06-01T00:00:00Z") == ts_from_str("2017-06-01T00:00:00+00:00")
