from __future__ import annotations

import json
import sys
import textwrap

import pytest

from repairbot.diffs import make_diff
from repairbot.minilang import parse, run_test
from repairbot.repair import (
    CoverageMatrix,
    ExternalToolSpec,
    ToolRegistry,
    gather_repair_input,
    repair_program,
    run_external_tool,
)
from repairbot.reproducer import WorkspaceManager

SOURCE = """fn non_pos(x) {
    if (x < 0) {
        return true;
    }
    return false;
}

fn test_zero() {
    assert non_pos(0);
}

fn test_pos() {
    assert !non_pos(5);
}
"""


@pytest.fixture()
def program():
    return parse(SOURCE, "src/main.ml")


@pytest.fixture()
def repair_input(program):
    traces = {name: run_test(program, name) for name in program.test_names()}
    matrix = CoverageMatrix.from_traces(traces.values(), program.stmt_count)
    return gather_repair_input(program, traces, matrix)


@pytest.fixture()
def workspace(tmp_path):
    ws = WorkspaceManager(tmp_path / "ws").create("b-ext")
    ws.source_dir.mkdir(parents=True)
    return ws


def good_diff(program):
    old = program.file_text("src/main.ml")
    return make_diff("src/main.ml", old, old.replace("x < 0", "x <= 0"))


def write_tool(tmp_path, name, body) -> ExternalToolSpec:
    script = tmp_path / f"{name}.py"
    script.write_text(textwrap.dedent(body))
    return ExternalToolSpec(name=name, command=(sys.executable, str(script)), timeout=20)


def echo_tool(tmp_path, diff) -> ExternalToolSpec:
    payload = json.dumps({"patches": [{"diff": diff, "note": "canned fix"}]})
    return write_tool(tmp_path, "echo-tool", f"""\
        import json, sys
        request = json.load(sys.stdin)
        assert request["failing_tests"] == ["test_zero"]
        assert request["failure_type"] == "AssertFail"
        sys.stdout.write({payload!r})
    """)


def test_echo_tool_yields_one_adequate_candidate(tmp_path, program, repair_input, workspace):
    spec = echo_tool(tmp_path, good_diff(program))
    diagnostics = []
    patches = run_external_tool(spec, repair_input, program, workspace,
                                build_id="b-ext", diagnostics=diagnostics)
    assert len(patches) == 1
    assert patches[0].candidate.adequate
    assert patches[0].candidate.tool_name == "echo-tool"
    assert patches[0].note == "canned fix"
    assert diagnostics == []


def test_inadequate_diff_still_returned_not_adequate(tmp_path, program, repair_input, workspace):
    old = program.file_text("src/main.ml")
    bad = make_diff("src/main.ml", old, old.replace("x < 0", "x < 100"))
    patches = run_external_tool(echo_tool(tmp_path, bad), repair_input, program,
                                workspace, build_id="b")
    assert len(patches) == 1
    assert not patches[0].candidate.adequate


def test_malformed_response_yields_zero_and_diagnostic(tmp_path, program, repair_input, workspace):
    spec = write_tool(tmp_path, "garbled", """\
        import sys
        sys.stdout.write("this is not a response document")
    """)
    diagnostics = []
    patches = run_external_tool(spec, repair_input, program, workspace,
                                diagnostics=diagnostics)
    assert patches == []
    assert any("malformed" in d for d in diagnostics)


def test_timeout_yields_zero_and_diagnostic(tmp_path, program, repair_input, workspace):
    spec = write_tool(tmp_path, "sleepy", """\
        import time
        time.sleep(60)
    """)
    spec = ExternalToolSpec(spec.name, spec.command, timeout=0.5)
    diagnostics = []
    patches = run_external_tool(spec, repair_input, program, workspace,
                                diagnostics=diagnostics)
    assert patches == []
    assert any("timeout" in d for d in diagnostics)


def test_crash_yields_zero_and_diagnostic(tmp_path, program, repair_input, workspace):
    spec = write_tool(tmp_path, "crashy", """\
        import sys
        sys.stderr.write("kaboom")
        sys.exit(3)
    """)
    diagnostics = []
    patches = run_external_tool(spec, repair_input, program, workspace,
                                diagnostics=diagnostics)
    assert patches == []
    assert any("exit status 3" in d for d in diagnostics)


def test_unapplicable_diff_skipped_with_diagnostic(tmp_path, program, repair_input, workspace):
    stale = make_diff("src/main.ml", "totally different source\n", "other\n")
    diagnostics = []
    patches = run_external_tool(echo_tool(tmp_path, stale), repair_input, program,
                                workspace, diagnostics=diagnostics)
    assert patches == []
    assert any("does not apply" in d for d in diagnostics)


def test_missing_executable_never_crashes_pipeline(program, repair_input, workspace):
    spec = ExternalToolSpec("ghost", ("/no/such/binary",), timeout=5)
    diagnostics = []
    patches = run_external_tool(spec, repair_input, program, workspace,
                                diagnostics=diagnostics)
    assert patches == []
    assert any("could not launch" in d for d in diagnostics)


def test_repair_program_runs_externals_after_builtins(tmp_path, program, workspace):
    spec = echo_tool(tmp_path, good_diff(program))
    registry = ToolRegistry(external=(spec,))
    outcome = repair_program(program, build_id="b-ext", registry=registry,
                             workspace=workspace)
    assert outcome.tools_run == ["condition-synth", "echo-tool"]
    assert any(p.candidate.tool_name == "echo-tool" and p.adequate
               for p in outcome.patches)
