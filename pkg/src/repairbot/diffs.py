"""Unified-diff creation and strict application for workspace source trees."""

from __future__ import annotations

import difflib
import re
from typing import Mapping


class PatchApplyError(ValueError):
    """The diff does not apply cleanly to the given tree."""


_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


NO_NEWLINE_MARKER = "\\ No newline at end of file"


def make_diff(path: str, old_text: str, new_text: str) -> str:
    """Unified diff for one file, with ``a/``/``b/`` prefixed headers and
    standard no-newline-at-EOF markers."""
    lines = difflib.unified_diff(
        old_text.splitlines(keepends=True),
        new_text.splitlines(keepends=True),
        fromfile=f"a/{path}",
        tofile=f"b/{path}",
    )
    out = []
    for line in lines:
        if line.endswith("\n"):
            out.append(line)
        else:
            out.append(line + "\n")
            if line[:1] in ("+", "-", " "):
                out.append(NO_NEWLINE_MARKER + "\n")
    return "".join(out)


def diff_paths(diff_text: str) -> list[str]:
    """Target paths touched by a diff (the ``+++ b/...`` headers)."""
    paths = []
    for line in diff_text.splitlines():
        if line.startswith("+++ "):
            target = line[4:].split("\t")[0].strip()
            if target.startswith("b/"):
                target = target[2:]
            paths.append(target)
    return paths


def apply_diff(diff_text: str, files: Mapping[str, str]) -> dict[str, str]:
    """Apply a unified diff to an in-memory tree, strictly.

    ``files`` maps path -> text for every file the diff touches. Context and
    deleted lines must match the original exactly; any mismatch raises
    :class:`PatchApplyError`. Returns the full patched tree (untouched files
    are passed through).
    """
    patched = dict(files)
    lines = diff_text.splitlines()
    i = 0
    current_path = None
    while i < len(lines):
        line = lines[i]
        if line.startswith("--- "):
            i += 1
            continue
        if line.startswith("+++ "):
            target = line[4:].split("\t")[0].strip()
            current_path = target[2:] if target.startswith("b/") else target
            i += 1
            continue
        match = _HUNK_RE.match(line)
        if match:
            if current_path is None:
                raise PatchApplyError("hunk before any file header")
            if current_path not in patched:
                raise PatchApplyError(f"diff targets unknown file {current_path!r}")
            i, patched[current_path] = _apply_hunk(
                lines, i, match, patched[current_path], current_path
            )
            continue
        i += 1
    return patched


def _apply_hunk(lines: list[str], start: int, match: re.Match, text: str, path: str):
    old_start = int(match.group(1))
    old_count = int(match.group(2)) if match.group(2) is not None else 1
    src = text.splitlines(keepends=True)
    # difflib uses start 0 for empty-source hunks
    pos = old_start - 1 if old_count > 0 else old_start
    out = src[:pos]
    consumed = 0
    i = start + 1
    last_tag = ""
    while i < len(lines):
        line = lines[i]
        if line.startswith(("--- ", "+++ ")) or _HUNK_RE.match(line):
            break
        if line.startswith("\\"):  # marker: the previous diff line had no \n
            if last_tag in ("+", " ") and out and out[-1].endswith("\n"):
                out[-1] = out[-1][:-1]
            i += 1
            continue
        tag, body = line[:1], line[1:] + "\n"
        if tag == " " or tag == "":
            _expect(src, pos + consumed, body, path)
            out.append(body)
            consumed += 1
            last_tag = " "
        elif tag == "-":
            _expect(src, pos + consumed, body, path)
            consumed += 1
            last_tag = "-"
        elif tag == "+":
            out.append(body)
            last_tag = "+"
        else:
            raise PatchApplyError(f"unrecognized diff line {line!r}")
        i += 1
    if consumed != old_count:
        raise PatchApplyError(
            f"hunk for {path} consumed {consumed} lines, header said {old_count}"
        )
    out.extend(src[pos + consumed:])
    return i, "".join(out)


def _expect(src: list[str], index: int, body: str, path: str) -> None:
    actual = src[index] if index < len(src) else None
    if actual is None or actual.rstrip("\n") != body.rstrip("\n"):
        raise PatchApplyError(
            f"context mismatch in {path} at line {index + 1}: "
            f"expected {body!r}, found {actual!r}"
        )
