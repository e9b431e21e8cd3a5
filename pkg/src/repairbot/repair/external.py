"""Process-level plugin protocol for external repair tools.

The tool is launched as a subprocess confined to the workspace: it receives
one JSON request document on stdin (workspace path, failing test names,
failure type, source file list, report path) and must answer on stdout with
``{"patches": [{"diff": ..., "note": ...}]}`` and exit status 0. Every
returned diff is validated here before it can become adequate; a crashing,
slow, or garbled tool yields zero candidates and a diagnostic, never an
exception.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

from ..diffs import PatchApplyError
from ..minilang.nodes import Program
from ..model import OverfitFlag, PatchCandidate, utc_now
from .engine import RepairInput, SynthPatch, patch_id_for, validate

DEFAULT_TOOL_TIMEOUT = 600.0


@dataclass(frozen=True)
class ExternalToolSpec:
    name: str
    command: tuple[str, ...]
    timeout: float = DEFAULT_TOOL_TIMEOUT


def build_request(repair_input: RepairInput, workspace) -> dict:
    return {
        "workspace": str(workspace.root) if workspace is not None else "",
        "failing_tests": list(repair_input.failing_test_names),
        "failure_type": repair_input.failure_type,
        "source_files": list(repair_input.source_files),
        "report_path": str(workspace.reports_dir / "suite.xml") if workspace is not None else "",
    }


def run_external_tool(
    spec: ExternalToolSpec,
    repair_input: RepairInput,
    program: Program,
    workspace=None,
    *,
    build_id: str = "",
    now: Optional[datetime] = None,
    diagnostics: Optional[list[str]] = None,
) -> list[SynthPatch]:
    def note(message: str) -> None:
        if diagnostics is not None:
            diagnostics.append(f"{spec.name}: {message}")

    request = json.dumps(build_request(repair_input, workspace))
    cwd = str(workspace.root) if workspace is not None else None
    try:
        proc = subprocess.run(
            list(spec.command),
            input=request,
            capture_output=True,
            text=True,
            timeout=spec.timeout,
            cwd=cwd,
        )
    except subprocess.TimeoutExpired:
        note(f"timeout after {spec.timeout}s")
        return []
    except OSError as exc:
        note(f"could not launch: {exc}")
        return []
    if proc.returncode != 0:
        note(f"exit status {proc.returncode}: {proc.stderr.strip()[:200]}")
        return []
    try:
        response = json.loads(proc.stdout)
        entries = response["patches"]
        assert isinstance(entries, list)
    except (json.JSONDecodeError, KeyError, TypeError, AssertionError):
        note("malformed response document")
        return []
    now = now or utc_now()
    patches: list[SynthPatch] = []
    for entry in entries:
        diff = entry.get("diff") if isinstance(entry, dict) else None
        if not isinstance(diff, str) or not diff.strip():
            note("patch entry without a diff")
            continue
        try:
            adequate = validate(program, diff)
        except PatchApplyError as exc:
            note(f"diff does not apply: {exc}")
            continue
        candidate = PatchCandidate(
            patch_id=patch_id_for(build_id, spec.name, diff),
            build_id=build_id,
            tool_name=spec.name,
            edit=diff,
            adequate=adequate,
            overfitting_flags=frozenset({OverfitFlag.NONE}),
            created_at=now,
        )
        patches.append(SynthPatch(candidate, note=str(entry.get("note", ""))))
    return patches
