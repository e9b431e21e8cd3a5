from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from repairbot.diffs import PatchApplyError, apply_diff, diff_paths, make_diff

OLD = "fn a() {\n    let x = 1;\n    return x;\n}\n"
NEW = "fn a() {\n    let x = 2;\n    return x;\n}\n"


def test_make_then_apply_round_trips():
    diff = make_diff("src/main.ml", OLD, NEW)
    assert apply_diff(diff, {"src/main.ml": OLD}) == {"src/main.ml": NEW}


def test_diff_paths():
    diff = make_diff("src/main.ml", OLD, NEW)
    assert diff_paths(diff) == ["src/main.ml"]


def test_untouched_files_pass_through():
    diff = make_diff("a.ml", OLD, NEW)
    tree = {"a.ml": OLD, "b.ml": "fn b() { return 1; }\n"}
    patched = apply_diff(diff, tree)
    assert patched["b.ml"] == tree["b.ml"]


def test_context_mismatch_raises():
    diff = make_diff("a.ml", OLD, NEW)
    with pytest.raises(PatchApplyError):
        apply_diff(diff, {"a.ml": OLD.replace("x", "y")})


def test_unknown_file_raises():
    diff = make_diff("a.ml", OLD, NEW)
    with pytest.raises(PatchApplyError):
        apply_diff(diff, {"other.ml": OLD})


def test_empty_diff_is_noop():
    assert apply_diff("", {"a.ml": OLD}) == {"a.ml": OLD}


def test_no_trailing_newline_handled():
    old = "line1\nline2"
    new = "line1\nline2 changed"
    diff = make_diff("f", old, new)
    assert apply_diff(diff, {"f": old}) == {"f": new}


def test_insertion_into_empty_file():
    diff = make_diff("f", "", "hello\n")
    assert apply_diff(diff, {"f": ""}) == {"f": "hello\n"}


_lines = st.lists(st.text(alphabet="abcXYZ .;(){}", max_size=12), max_size=20)


@given(old_lines=_lines, new_lines=_lines)
def test_round_trip_property(old_lines, new_lines):
    old = "".join(line + "\n" for line in old_lines)
    new = "".join(line + "\n" for line in new_lines)
    diff = make_diff("file", old, new)
    assert apply_diff(diff, {"file": old}) == {"file": new}
