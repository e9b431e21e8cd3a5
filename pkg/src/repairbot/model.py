"""Shared domain types and the outcome taxonomy used by every pipeline stage.

Every type here is an immutable value object: instances are safe to share
between concurrent workers and are serialized flat into the archive's
line-delimited format (see :mod:`repairbot.archive`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence


class ContractViolation(ValueError):
    """A caller broke an operation's stated precondition."""


class SignatureParseError(ValueError):
    """Raised when a stack trace has no parseable head line."""


class BuildTool(str, Enum):
    MAVEN_LIKE = "maven-like"
    GRADLE_LIKE = "gradle-like"
    FIXTURE_MINIBUILD = "fixture-minibuild"
    UNKNOWN = "unknown"


class Trigger(str, Enum):
    PUSH = "push"
    PULL_REQUEST = "pull_request"


class CiStatus(str, Enum):
    PASSED = "passed"
    FAILED = "failed"
    ERRORED = "errored"
    CANCELED = "canceled"


class Outcome(str, Enum):
    """Closed six-bucket taxonomy of reproduction attempts.

    The buckets partition all attempts; statistics rely on that, so any new
    cause must extend the enum instead of overloading HARNESS_ERROR.
    """

    REPRODUCED = "reproduced"
    CLONE_ERROR = "clone_error"
    CHECKOUT_ERROR = "checkout_error"
    COMPILE_ERROR = "compile_error"
    HARNESS_ERROR = "harness_error"
    NOT_REPRODUCED = "not_reproduced"


class Step(str, Enum):
    CLONE = "clone"
    CHECKOUT = "checkout"
    COMPILE = "compile"
    TEST = "test"
    OBSERVE = "observe"


# Canonical step order for a reproduction attempt.
STEP_ORDER = (Step.CLONE, Step.CHECKOUT, Step.COMPILE, Step.TEST, Step.OBSERVE)

# Bucket charged when a given step is the first to fail.
_STEP_BUCKET = {
    Step.CLONE: Outcome.CLONE_ERROR,
    Step.CHECKOUT: Outcome.CHECKOUT_ERROR,
    Step.COMPILE: Outcome.COMPILE_ERROR,
    Step.TEST: Outcome.HARNESS_ERROR,
    Step.OBSERVE: Outcome.HARNESS_ERROR,
}


class StepStatus(str, Enum):
    OK = "ok"
    FAILED = "failed"
    SKIPPED = "skipped"  # never ran because an earlier step failed


class Verdict(str, Enum):
    PENDING = "pending"
    CORRECT = "correct"
    OVERFITTING = "overfitting"
    DUPLICATE_HUMAN_FIX = "duplicate_human_fix"


class OverfitFlag(str, Enum):
    CONSTANT_PREDICATE = "constant_predicate"
    SYNTACTIC_TAUTOLOGY = "syntactic_tautology"
    NONE = "none"


def utc_now() -> datetime:
    """Current UTC time truncated to second precision (storage precision)."""
    return datetime.now(timezone.utc).replace(microsecond=0)


def normalize_ts(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def ts_to_str(ts: datetime) -> str:
    return normalize_ts(ts).isoformat()


def ts_from_str(raw: str) -> datetime:
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    return normalize_ts(datetime.fromisoformat(raw))


@dataclass(frozen=True)
class ProjectRef:
    """A code-hosting project eligible for repair attempts."""

    host_id: str
    slug: str
    default_branch: str
    stars: int
    last_activity: datetime
    language_tag: str
    build_tool_tag: BuildTool
    ci_enabled: bool

    def __post_init__(self) -> None:
        if not self.slug or self.slug.count("/") != 1:
            raise ValueError(f"slug must be 'owner/name': {self.slug!r}")
        if self.stars < 0:
            raise ValueError("stars must be >= 0")

    def to_payload(self) -> dict:
        return {
            "host_id": self.host_id,
            "slug": self.slug,
            "default_branch": self.default_branch,
            "stars": self.stars,
            "last_activity": ts_to_str(self.last_activity),
            "language_tag": self.language_tag,
            "build_tool_tag": self.build_tool_tag.value,
            "ci_enabled": self.ci_enabled,
        }

    @classmethod
    def from_payload(cls, data: Mapping) -> "ProjectRef":
        return cls(
            host_id=data["host_id"],
            slug=data["slug"],
            default_branch=data["default_branch"],
            stars=int(data["stars"]),
            last_activity=ts_from_str(data["last_activity"]),
            language_tag=data["language_tag"],
            build_tool_tag=BuildTool(data["build_tool_tag"]),
            ci_enabled=bool(data["ci_enabled"]),
        )


@dataclass(frozen=True)
class BuildRecord:
    """One CI build: what was built, how it ended, and where its log lives."""

    build_id: str
    project: ProjectRef
    trigger: Trigger
    commit_id: str
    pr_base_commit: Optional[str]
    pr_head_commit: Optional[str]
    ci_status: CiStatus
    finished_at: datetime
    log_handle: str

    def __post_init__(self) -> None:
        is_pr = self.trigger is Trigger.PULL_REQUEST
        has_pair = self.pr_base_commit is not None and self.pr_head_commit is not None
        if is_pr and not has_pair:
            raise ValueError("pull_request builds need pr_base_commit and pr_head_commit")
        if not is_pr and (self.pr_base_commit or self.pr_head_commit):
            raise ValueError("push builds must not carry PR commits")

    def to_payload(self) -> dict:
        return {
            "build_id": self.build_id,
            "project": self.project.to_payload(),
            "trigger": self.trigger.value,
            "commit_id": self.commit_id,
            "pr_base_commit": self.pr_base_commit,
            "pr_head_commit": self.pr_head_commit,
            "ci_status": self.ci_status.value,
            "finished_at": ts_to_str(self.finished_at),
            "log_handle": self.log_handle,
        }

    @classmethod
    def from_payload(cls, data: Mapping) -> "BuildRecord":
        return cls(
            build_id=data["build_id"],
            project=ProjectRef.from_payload(data["project"]),
            trigger=Trigger(data["trigger"]),
            commit_id=data["commit_id"],
            pr_base_commit=data.get("pr_base_commit"),
            pr_head_commit=data.get("pr_head_commit"),
            ci_status=CiStatus(data["ci_status"]),
            finished_at=ts_from_str(data["finished_at"]),
            log_handle=data["log_handle"],
        )


@dataclass(frozen=True)
class FailureSignature:
    """Head of a failing test's trace: exception-style type plus detail."""

    exception_type: str
    failing_test_name: str
    detail: str

    def __post_init__(self) -> None:
        if not self.exception_type or any(c.isspace() for c in self.exception_type):
            raise ValueError(f"bad exception_type: {self.exception_type!r}")

    def head_line(self) -> str:
        return f"{self.exception_type}: {self.detail}" if self.detail else self.exception_type

    def to_payload(self) -> dict:
        return {
            "exception_type": self.exception_type,
            "failing_test_name": self.failing_test_name,
            "detail": self.detail,
        }

    @classmethod
    def from_payload(cls, data: Mapping) -> "FailureSignature":
        return cls(data["exception_type"], data["failing_test_name"], data["detail"])


@dataclass(frozen=True)
class StepResult:
    """Status of one reproduction step.

    ``failing_tests`` is populated only on a successful observe step; it is
    what separates ``reproduced`` from ``not_reproduced``.
    """

    step: Step
    status: StepStatus
    detail: str = ""
    failing_tests: Optional[int] = None
    timed_out: bool = False


@dataclass(frozen=True)
class ReproductionResult:
    build: BuildRecord
    outcome: Outcome
    tests_run: int
    tests_failed: int
    signatures: tuple[FailureSignature, ...]
    wall_time: float
    workspace_id: str

    def __post_init__(self) -> None:
        if (self.outcome is Outcome.REPRODUCED) != (self.tests_failed >= 1):
            raise ValueError("outcome=reproduced iff tests_failed >= 1")
        if self.outcome in (Outcome.CLONE_ERROR, Outcome.CHECKOUT_ERROR, Outcome.COMPILE_ERROR):
            if self.tests_run != 0:
                raise ValueError(f"{self.outcome.value} implies tests_run=0")

    def to_payload(self) -> dict:
        return {
            "build_id": self.build.build_id,
            "project": self.build.project.slug,
            "outcome": self.outcome.value,
            "tests_run": self.tests_run,
            "tests_failed": self.tests_failed,
            "signatures": [s.to_payload() for s in self.signatures],
            "wall_time": self.wall_time,
            "workspace_id": self.workspace_id,
        }


@dataclass(frozen=True)
class PatchCandidate:
    """A concrete source edit plus its validation status."""

    patch_id: str
    build_id: str
    tool_name: str
    edit: str  # unified diff against the reproduced source tree
    adequate: bool
    overfitting_flags: frozenset[OverfitFlag]
    created_at: datetime

    def flag_count(self) -> int:
        """Number of real overfitting flags (NONE does not count)."""
        return len(self.overfitting_flags - {OverfitFlag.NONE})

    def to_payload(self) -> dict:
        return {
            "patch_id": self.patch_id,
            "build_id": self.build_id,
            "tool_name": self.tool_name,
            "edit": self.edit,
            "adequate": self.adequate,
            "overfitting_flags": sorted(f.value for f in self.overfitting_flags),
            "created_at": ts_to_str(self.created_at),
        }

    @classmethod
    def from_payload(cls, data: Mapping) -> "PatchCandidate":
        return cls(
            patch_id=data["patch_id"],
            build_id=data["build_id"],
            tool_name=data["tool_name"],
            edit=data["edit"],
            adequate=bool(data["adequate"]),
            overfitting_flags=frozenset(OverfitFlag(f) for f in data["overfitting_flags"]),
            created_at=ts_from_str(data["created_at"]),
        )


@dataclass(frozen=True)
class TriageVerdict:
    """An analyst's decision on a patch; PENDING may only move forward."""

    patch_id: str
    verdict: Verdict
    analyst_id: str
    note: str
    decided_at: datetime

    def to_payload(self) -> dict:
        return {
            "patch_id": self.patch_id,
            "verdict": self.verdict.value,
            "analyst_id": self.analyst_id,
            "note": self.note,
            "decided_at": ts_to_str(self.decided_at),
        }

    @classmethod
    def from_payload(cls, data: Mapping) -> "TriageVerdict":
        return cls(
            patch_id=data["patch_id"],
            verdict=Verdict(data["verdict"]),
            analyst_id=data["analyst_id"],
            note=data["note"],
            decided_at=ts_from_str(data["decided_at"]),
        )


def allowed_verdict_transition(current: Verdict, new: Verdict) -> bool:
    """PENDING -> {correct, overfitting, duplicate_human_fix}; nothing else."""
    return current is Verdict.PENDING and new is not Verdict.PENDING


@dataclass(frozen=True)
class RunStatistics:
    """Per-run counters mirroring the archival tables and figures."""

    run_id: str
    window_start: datetime
    window_end: datetime
    builds_collected: int = 0
    ci_failing: int = 0
    interesting: int = 0
    outcomes: Mapping[str, int] = field(default_factory=dict)
    patches_found: int = 0
    per_project: Mapping[str, Mapping[str, int]] = field(default_factory=dict)
    per_signature: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (self.interesting <= self.ci_failing <= self.builds_collected):
            raise ValueError("need interesting <= ci_failing <= builds_collected")
        for key in self.outcomes:
            Outcome(key)  # reject unknown buckets

    def attempts(self) -> int:
        return sum(self.outcomes.values())

    def to_payload(self) -> dict:
        return {
            "run_id": self.run_id,
            "window_start": ts_to_str(self.window_start),
            "window_end": ts_to_str(self.window_end),
            "builds_collected": self.builds_collected,
            "ci_failing": self.ci_failing,
            "interesting": self.interesting,
            "outcomes": dict(self.outcomes),
            "patches_found": self.patches_found,
            "per_project": {k: dict(v) for k, v in self.per_project.items()},
            "per_signature": dict(self.per_signature),
        }

    @classmethod
    def from_payload(cls, data: Mapping) -> "RunStatistics":
        return cls(
            run_id=data["run_id"],
            window_start=ts_from_str(data["window_start"]),
            window_end=ts_from_str(data["window_end"]),
            builds_collected=int(data["builds_collected"]),
            ci_failing=int(data["ci_failing"]),
            interesting=int(data["interesting"]),
            outcomes={k: int(v) for k, v in data["outcomes"].items()},
            patches_found=int(data["patches_found"]),
            per_project={k: dict(v) for k, v in data.get("per_project", {}).items()},
            per_signature={k: int(v) for k, v in data.get("per_signature", {}).items()},
        )


def classify_outcome(attempt_trace: Sequence[StepResult]) -> Outcome:
    """Map an ordered step trace into exactly one taxonomy bucket.

    The bucket of the first failed step wins; a fully successful trace is
    ``reproduced`` iff the observe step saw at least one failing test.
    """
    steps = [r.step for r in attempt_trace]
    if steps != list(STEP_ORDER):
        raise ContractViolation(f"trace must list steps {[s.value for s in STEP_ORDER]}, got {[s.value for s in steps]}")
    failed_seen = False
    for result in attempt_trace:
        if result.status is StepStatus.FAILED and not failed_seen:
            return _STEP_BUCKET[result.step]
        if result.status is StepStatus.SKIPPED and not failed_seen:
            raise ContractViolation(f"step {result.step.value} skipped without an earlier failure")
        if result.status is StepStatus.FAILED:
            failed_seen = True
    observe = attempt_trace[-1]
    if observe.failing_tests is None:
        raise ContractViolation("successful observe step must carry failing_tests")
    return Outcome.REPRODUCED if observe.failing_tests >= 1 else Outcome.NOT_REPRODUCED


def extract_signature(stack_trace_text: str, failing_test_name: str = "") -> FailureSignature:
    """Parse ``<ExceptionType>[: detail]`` from the first line of a trace."""
    if not stack_trace_text.strip():
        raise SignatureParseError("empty stack trace")
    first_line = stack_trace_text.lstrip("\n").splitlines()[0]
    head, sep, rest = first_line.partition(":")
    exception_type = head.strip()
    detail = rest.strip() if sep else ""
    if not exception_type or any(c.isspace() for c in exception_type):
        raise SignatureParseError(f"no exception-type token in {first_line!r}")
    return FailureSignature(
        exception_type=exception_type,
        failing_test_name=failing_test_name,
        detail=detail,
    )
