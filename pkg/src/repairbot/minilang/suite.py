"""Test runner for minilang programs: executes every test_* function and
emits the XML report subset alongside per-test execution traces."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..reports import CaseResult, CaseStatus, SuiteResult, TestReport, write_suite_xml
from .interp import ExecutionTrace, TestOutcome, run_test
from .nodes import Program


class NoTestsError(RuntimeError):
    """A suite run on a program with no test functions is a harness fault."""


_CASE_STATUS = {
    TestOutcome.PASS: CaseStatus.PASSED,
    TestOutcome.ASSERT_FAIL: CaseStatus.FAILED,
    TestOutcome.NULL_DEREF: CaseStatus.ERRORED,
    TestOutcome.RUNTIME_ERROR: CaseStatus.ERRORED,
}


@dataclass(frozen=True)
class SuiteRun:
    report: TestReport
    traces: dict[str, ExecutionTrace]
    xml_text: str


def trace_text(trace: ExecutionTrace) -> str:
    """Two-line pseudo stack trace; the head line is the failure signature."""
    if trace.failure is None:
        return ""
    head = trace.failure.head_line()
    loc = f"    at {trace.test_name} (stmt {trace.error_stmt})"
    return f"{head}\n{loc}"


def run_suite(program: Program, suite_name: str = "minilang",
              report_dir: Optional[Path] = None) -> SuiteRun:
    """Run all tests in program order; deterministic, byte-identical XML."""
    test_names = program.test_names()
    if not test_names:
        raise NoTestsError("program defines no test_* functions")
    traces: dict[str, ExecutionTrace] = {}
    cases = []
    for name in test_names:
        trace = run_test(program, name)
        traces[name] = trace
        status = _CASE_STATUS[trace.outcome]
        if trace.failure is not None:
            cases.append(
                CaseResult(
                    name=name,
                    status=status,
                    trace=trace_text(trace),
                    message=trace.failure.detail,
                    error_type=trace.failure.token,
                )
            )
        else:
            cases.append(CaseResult(name=name, status=status))
    suite = SuiteResult(
        name=suite_name,
        tests=len(cases),
        failures=sum(c.status is CaseStatus.FAILED for c in cases),
        errors=sum(c.status is CaseStatus.ERRORED for c in cases),
        skipped=0,
        cases=tuple(cases),
    )
    from ..reports import suite_to_xml

    xml_text = suite_to_xml(suite)
    if report_dir is not None:
        write_suite_xml(suite, report_dir)
    return SuiteRun(report=TestReport((suite,)), traces=traces, xml_text=xml_text)
