"""Stage 2: reproduce a failing build locally, deterministically.

Four steps — checkout (clone + commit/merge reconstruction), compile, test,
observe — each reported as a StepResult so the attempt classifies into
exactly one taxonomy bucket. Every attempt gets a fresh workspace with its
own dependency cache; nothing is shared between concurrent attempts except
the archive writer.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Mapping, Optional, Protocol

from . import gitops
from .feeds import CiFeed
from .minilang import MiniSyntaxError, NoTestsError, parse_project, run_suite
from .minilang.nodes import Program
from .model import (
    BuildRecord,
    BuildTool,
    FailureSignature,
    Outcome,
    ReproductionResult,
    SignatureParseError,
    Step,
    StepResult,
    StepStatus,
    Trigger,
    classify_outcome,
    extract_signature,
    utc_now,
)
from .reports import ReportParseError, TestReport, parse_test_report

DEFAULT_ENV_PINS = {"minilang-toolchain": "1"}
DEFAULT_SKIP_CHECKS = frozenset({"style-check", "coverage-gate", "integration-tests"})
PROJECT_MANIFEST = "project.manifest"


@dataclass(frozen=True)
class Timeouts:
    clone: float = 120.0
    compile: float = 1800.0
    tests: float = 3600.0


@dataclass(frozen=True)
class Workspace:
    """Throwaway directory tree for one reproduction attempt."""

    workspace_id: str
    root: Path
    source_dir: Path
    dependency_cache_dir: Path
    env_pins: Mapping[str, str]
    created_at: datetime

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"


class WorkspaceManager:
    """Creates disjoint workspaces under one run root."""

    def __init__(self, root: Path, env_pins: Optional[Mapping[str, str]] = None):
        self.root = Path(root)
        self.env_pins = dict(env_pins or DEFAULT_ENV_PINS)
        self.root.mkdir(parents=True, exist_ok=True)

    def create(self, build_id: str) -> Workspace:
        workspace_id = f"{build_id}-{uuid.uuid4().hex[:8]}"
        ws_root = self.root / workspace_id
        ws_root.mkdir(parents=True)
        deps = ws_root / "deps"
        deps.mkdir()
        return Workspace(
            workspace_id=workspace_id,
            root=ws_root,
            source_dir=ws_root / "source",
            dependency_cache_dir=deps,
            env_pins=dict(self.env_pins),
            created_at=utc_now(),
        )

    def delete(self, workspace: Workspace) -> None:
        shutil.rmtree(workspace.root, ignore_errors=True)

    def archive_manifest(self, workspace: Workspace) -> dict:
        """Diff-able content manifest recorded before a kept workspace is
        dropped: relative path -> sha256."""
        entries = {}
        for path in sorted(workspace.root.rglob("*")):
            if path.is_file():
                digest = hashlib.sha256(path.read_bytes()).hexdigest()
                entries[str(path.relative_to(workspace.root))] = digest
        return {"workspace_id": workspace.workspace_id, "files": entries}


class BuildToolAdapter(Protocol):
    """Compile and test a checked-out tree without leaving the workspace."""

    def compile(self, workspace: Workspace, timeout: float) -> StepResult: ...
    def run_tests(self, workspace: Workspace, timeout: float) -> StepResult: ...


class MinibuildAdapter:
    """Adapter for fixture-minibuild projects (minilang sources).

    Compilation is parsing; auxiliary checks declared in the project manifest
    are skipped when listed in ``skip_checks`` (style/coverage/integration by
    default) and fail the test step otherwise. Work is in-process and bounded
    by interpreter fuel, so the timeout arguments are accepted for interface
    parity but never trip.
    """

    def __init__(self, skip_checks: frozenset[str] = DEFAULT_SKIP_CHECKS):
        self.skip_checks = frozenset(skip_checks)

    def _manifest(self, workspace: Workspace) -> dict:
        path = workspace.source_dir / PROJECT_MANIFEST
        if not path.is_file():
            raise ValueError(f"no {PROJECT_MANIFEST} in source tree")
        return json.loads(path.read_text())

    def load_program(self, workspace: Workspace) -> Program:
        manifest = self._manifest(workspace)
        files = []
        for rel in manifest.get("sources", []):
            files.append((rel, (workspace.source_dir / rel).read_text()))
        return parse_project(files)

    def compile(self, workspace: Workspace, timeout: float = 1800.0) -> StepResult:
        try:
            manifest = self._manifest(workspace)
        except (ValueError, json.JSONDecodeError) as exc:
            return StepResult(Step.COMPILE, StepStatus.FAILED, f"bad project manifest: {exc}")
        if manifest.get("modules"):
            # Recommendation: repair tools assume a single well-identified
            # source tree; refuse rather than mis-repair.
            return StepResult(Step.COMPILE, StepStatus.FAILED,
                              "multi-module project; refusing to build")
        wanted = manifest.get("toolchain")
        pinned = workspace.env_pins.get("minilang-toolchain")
        if wanted is not None and str(wanted) != str(pinned):
            return StepResult(Step.COMPILE, StepStatus.FAILED,
                              f"project requires toolchain {wanted}, pinned is {pinned}")
        if not manifest.get("sources"):
            return StepResult(Step.COMPILE, StepStatus.FAILED, "manifest lists no sources")
        try:
            self.load_program(workspace)
        except MiniSyntaxError as exc:
            return StepResult(Step.COMPILE, StepStatus.FAILED, f"syntax error: {exc}")
        except FileNotFoundError as exc:
            return StepResult(Step.COMPILE, StepStatus.FAILED, f"missing source file: {exc}")
        return StepResult(Step.COMPILE, StepStatus.OK)

    def run_tests(self, workspace: Workspace, timeout: float = 3600.0) -> StepResult:
        manifest = self._manifest(workspace)
        unskipped = [c for c in manifest.get("checks", []) if c not in self.skip_checks]
        if unskipped:
            return StepResult(Step.TEST, StepStatus.FAILED,
                              f"auxiliary checks not in skip list: {', '.join(unskipped)}")
        program = self.load_program(workspace)
        try:
            run_suite(program, manifest.get("name", "minilang"), workspace.reports_dir)
        except NoTestsError as exc:
            return StepResult(Step.TEST, StepStatus.FAILED, str(exc))
        return StepResult(Step.TEST, StepStatus.OK)


DEFAULT_ADAPTERS: dict[BuildTool, BuildToolAdapter] = {
    BuildTool.FIXTURE_MINIBUILD: MinibuildAdapter(),
}


def checkout(build: BuildRecord, repo_locator: str, workspace: Workspace,
             timeout: float = 120.0) -> list[StepResult]:
    """Clone the repository and restore the exact CI source state.

    Push builds check out the commit; pull-request builds recreate the CI's
    merge of the head into the base. Returns the clone and checkout steps.
    """
    try:
        gitops.clone(repo_locator, workspace.source_dir, timeout=timeout)
    except (gitops.GitError, OSError) as exc:
        return [
            StepResult(Step.CLONE, StepStatus.FAILED, str(exc)),
            StepResult(Step.CHECKOUT, StepStatus.SKIPPED),
        ]
    clone_step = StepResult(Step.CLONE, StepStatus.OK)
    try:
        if build.trigger is Trigger.PULL_REQUEST:
            gitops.checkout(workspace.source_dir, build.pr_base_commit)
            gitops.merge(workspace.source_dir, build.pr_head_commit,
                         message=f"ci merge for {build.build_id}")
        else:
            gitops.checkout(workspace.source_dir, build.commit_id)
    except gitops.GitError as exc:
        return [clone_step, StepResult(Step.CHECKOUT, StepStatus.FAILED, str(exc))]
    return [clone_step, StepResult(Step.CHECKOUT, StepStatus.OK)]


def compile_workspace(workspace: Workspace, adapter: BuildToolAdapter,
                      timeout: float = 1800.0) -> StepResult:
    try:
        return adapter.compile(workspace, timeout)
    except Exception as exc:  # adapter bugs must still land in the taxonomy
        return StepResult(Step.COMPILE, StepStatus.FAILED, f"adapter crash: {exc}")


def run_tests(workspace: Workspace, adapter: BuildToolAdapter,
              timeout: float = 3600.0) -> StepResult:
    try:
        return adapter.run_tests(workspace, timeout)
    except Exception as exc:
        return StepResult(Step.TEST, StepStatus.FAILED, f"adapter crash: {exc}")


def observe(workspace: Workspace) -> tuple[StepResult, Optional[TestReport]]:
    report_files = sorted(workspace.reports_dir.glob("*.xml"))
    try:
        report = parse_test_report(report_files)
    except ReportParseError as exc:
        return StepResult(Step.OBSERVE, StepStatus.FAILED, str(exc)), None
    return (
        StepResult(Step.OBSERVE, StepStatus.OK, failing_tests=report.tests_failed),
        report,
    )


def signatures_from_report(report: TestReport) -> tuple[FailureSignature, ...]:
    signatures = []
    for case in report.failing_cases():
        try:
            signatures.append(extract_signature(case.trace, case.name))
        except SignatureParseError:
            signatures.append(FailureSignature("UnparsedFailure", case.name, ""))
    return tuple(signatures)


@dataclass
class ReproductionAttempt:
    """A ReproductionResult plus what the repair stage needs from it."""

    result: ReproductionResult
    steps: list[StepResult]
    workspace: Optional[Workspace]  # retained only when reproduced (or keep_all)
    report: Optional[TestReport]
    started_at: datetime
    diagnostics: list[str] = field(default_factory=list)


class Reproducer:
    """Runs the four-step procedure and classifies each attempt."""

    def __init__(self, feed: CiFeed, workdir: Path,
                 adapters: Optional[Mapping[BuildTool, BuildToolAdapter]] = None,
                 timeouts: Timeouts = Timeouts(), keep_all: bool = False,
                 env_pins: Optional[Mapping[str, str]] = None):
        self.feed = feed
        self.manager = WorkspaceManager(Path(workdir), env_pins)
        self.adapters = dict(DEFAULT_ADAPTERS) if adapters is None else dict(adapters)
        self.timeouts = timeouts
        self.keep_all = keep_all

    def reproduce(self, build: BuildRecord) -> ReproductionAttempt:
        """Total over the six-bucket taxonomy; never raises for a build."""
        started_at = utc_now()
        t0 = time.perf_counter()
        workspace = self.manager.create(build.build_id)
        diagnostics: list[str] = []
        report: Optional[TestReport] = None

        steps = checkout(build, self.feed.repo_locator(build.build_id), workspace,
                         timeout=self.timeouts.clone)
        if all(s.status is StepStatus.OK for s in steps):
            adapter = self.adapters.get(build.project.build_tool_tag)
            if adapter is None:
                steps.append(StepResult(
                    Step.COMPILE, StepStatus.FAILED,
                    f"no build adapter for {build.project.build_tool_tag.value}"))
            else:
                steps.append(compile_workspace(workspace, adapter, self.timeouts.compile))
            if steps[-1].status is StepStatus.OK:
                steps.append(run_tests(workspace, adapter, self.timeouts.tests))
            if steps[-1].status is StepStatus.OK:
                observe_step, report = observe(workspace)
                steps.append(observe_step)
                if report is not None:
                    diagnostics.extend(report.warnings)
        steps = _pad_skipped(steps)
        outcome = classify_outcome(steps)
        signatures = signatures_from_report(report) if report is not None else ()
        result = ReproductionResult(
            build=build,
            outcome=outcome,
            tests_run=report.tests_run if report is not None else 0,
            tests_failed=report.tests_failed if report is not None else 0,
            signatures=signatures if outcome is Outcome.REPRODUCED else (),
            wall_time=time.perf_counter() - t0,
            workspace_id=workspace.workspace_id,
        )
        keep = self.keep_all or outcome is Outcome.REPRODUCED
        kept_workspace: Optional[Workspace] = workspace if keep else None
        if not keep:
            self.manager.delete(workspace)
        return ReproductionAttempt(
            result=result,
            steps=steps,
            workspace=kept_workspace,
            report=report,
            started_at=started_at,
            diagnostics=diagnostics,
        )

    def release(self, attempt: ReproductionAttempt) -> Optional[dict]:
        """Drop a kept workspace once repair is done; returns its content
        manifest for archival."""
        if attempt.workspace is None:
            return None
        manifest = self.manager.archive_manifest(attempt.workspace)
        self.manager.delete(attempt.workspace)
        attempt.workspace = None
        return manifest


def _pad_skipped(steps: list[StepResult]) -> list[StepResult]:
    """Fill in SKIPPED results for steps never reached."""
    have = {s.step for s in steps}
    out = list(steps)
    for step in (Step.CLONE, Step.CHECKOUT, Step.COMPILE, Step.TEST, Step.OBSERVE):
        if step not in have:
            out.append(StepResult(step, StepStatus.SKIPPED))
    order = {s: i for i, s in enumerate((Step.CLONE, Step.CHECKOUT, Step.COMPILE,
                                         Step.TEST, Step.OBSERVE))}
    out.sort(key=lambda s: order[s.step])
    return out
