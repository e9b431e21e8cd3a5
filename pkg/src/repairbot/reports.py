"""Surefire-style XML test reports: the subset written by the fixture build
tool and parsed back when observing test outcomes.

Format, bit-exact: root ``<testsuite name tests failures errors skipped>``
with ``<testcase name time>`` children, each optionally containing
``<failure message type>trace</failure>`` or ``<error ...>``.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence


class ReportParseError(ValueError):
    """Report files are missing or not well-formed XML."""


class CaseStatus(str, Enum):
    PASSED = "passed"
    FAILED = "failed"
    ERRORED = "errored"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class CaseResult:
    name: str
    status: CaseStatus
    trace: str = ""  # first line is "<Type>[: detail]" for failed/errored
    message: str = ""
    error_type: str = ""
    time: float = 0.0


@dataclass(frozen=True)
class SuiteResult:
    name: str
    tests: int
    failures: int
    errors: int
    skipped: int
    cases: tuple[CaseResult, ...]


@dataclass(frozen=True)
class TestReport:
    suites: tuple[SuiteResult, ...]
    warnings: tuple[str, ...] = ()

    @property
    def tests_run(self) -> int:
        return sum(s.tests for s in self.suites)

    @property
    def tests_failed(self) -> int:
        """Failing tests = failures + errors, the repair-relevant count."""
        return sum(s.failures + s.errors for s in self.suites)

    def failing_cases(self) -> list[CaseResult]:
        return [
            c
            for s in self.suites
            for c in s.cases
            if c.status in (CaseStatus.FAILED, CaseStatus.ERRORED)
        ]


_CHILD_TAG = {CaseStatus.FAILED: "failure", CaseStatus.ERRORED: "error"}


def suite_to_xml(suite: SuiteResult) -> str:
    root = ET.Element(
        "testsuite",
        name=suite.name,
        tests=str(suite.tests),
        failures=str(suite.failures),
        errors=str(suite.errors),
        skipped=str(suite.skipped),
    )
    for case in suite.cases:
        elem = ET.SubElement(root, "testcase", name=case.name, time="0")
        tag = _CHILD_TAG.get(case.status)
        if tag:
            child = ET.SubElement(elem, tag, message=case.message, type=case.error_type)
            child.text = case.trace
        elif case.status is CaseStatus.SKIPPED:
            ET.SubElement(elem, "skipped")
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def write_suite_xml(suite: SuiteResult, report_dir: Path) -> Path:
    report_dir.mkdir(parents=True, exist_ok=True)
    out = report_dir / "suite.xml"
    out.write_text(suite_to_xml(suite))
    return out


def parse_suite_xml(text: str, source: str = "<xml>") -> tuple[SuiteResult, list[str]]:
    """Parse one suite file; counts are recomputed from cases and the
    attribute values only cross-checked (cases win on mismatch)."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ReportParseError(f"{source}: {exc}") from exc
    if root.tag != "testsuite":
        raise ReportParseError(f"{source}: expected <testsuite> root, found <{root.tag}>")
    warnings: list[str] = []
    cases = []
    for case_elem in root.findall("testcase"):
        status = CaseStatus.PASSED
        trace = message = error_type = ""
        for tag, st in (("failure", CaseStatus.FAILED), ("error", CaseStatus.ERRORED)):
            child = case_elem.find(tag)
            if child is not None:
                status = st
                trace = child.text or ""
                message = child.get("message", "")
                error_type = child.get("type", "")
                break
        else:
            if case_elem.find("skipped") is not None:
                status = CaseStatus.SKIPPED
        cases.append(
            CaseResult(
                name=case_elem.get("name", ""),
                status=status,
                trace=trace,
                message=message,
                error_type=error_type,
                time=float(case_elem.get("time", "0") or 0),
            )
        )
    tally = {
        "tests": len(cases),
        "failures": sum(c.status is CaseStatus.FAILED for c in cases),
        "errors": sum(c.status is CaseStatus.ERRORED for c in cases),
        "skipped": sum(c.status is CaseStatus.SKIPPED for c in cases),
    }
    for attr, actual in tally.items():
        declared = root.get(attr)
        if declared is not None and declared.isdigit() and int(declared) != actual:
            warnings.append(
                f"{source}: suite attribute {attr}={declared} disagrees with "
                f"{actual} tallied from cases; cases win"
            )
    suite = SuiteResult(
        name=root.get("name", ""),
        tests=tally["tests"],
        failures=tally["failures"],
        errors=tally["errors"],
        skipped=tally["skipped"],
        cases=tuple(cases),
    )
    return suite, warnings


def parse_test_report(report_files: Sequence[Path]) -> TestReport:
    """Parse a set of suite XML files into one TestReport."""
    if not report_files:
        raise ReportParseError("no report files produced")
    suites = []
    warnings: list[str] = []
    for path in sorted(report_files):
        suite, suite_warnings = parse_suite_xml(Path(path).read_text(), str(path))
        suites.append(suite)
        warnings.extend(suite_warnings)
    return TestReport(tuple(suites), tuple(warnings))
