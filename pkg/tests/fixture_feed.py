"""Authoring of the 8-build fixture feed used across the test suite.

The feed covers all six reproduction-outcome buckets plus a pull-request
merge build and a flaky build:

  b1-clone     repository directory missing            -> clone_error
  b2-checkout  commit deleted (never existed)          -> checkout_error
  b3-compile   syntax error at the build commit        -> compile_error
  b4-harness   project has no test functions           -> harness_error
  b5-flaky     CI log claims a failure, tests pass     -> not_reproduced
  b6-npe       null dereference bug (fix-1 shape)      -> reproduced, npe-guard patch
  b7-cond      PR merge with an off-by-one condition   -> reproduced, condition-synth patch
  b8-pass      CI-passing build                        -> filtered by the scanner

Run as a script to build a feed for manual CLI use:
    python3 tests/fixture_feed.py /tmp/demo-feed
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

NOW = datetime(2017, 6, 1, 12, 0, 0, tzinfo=timezone.utc)
WINDOW_START = NOW - timedelta(hours=4)
WINDOW_END = NOW

_GIT_ENV = {
    "GIT_AUTHOR_NAME": "fixture",
    "GIT_AUTHOR_EMAIL": "fixture@localhost",
    "GIT_COMMITTER_NAME": "fixture",
    "GIT_COMMITTER_EMAIL": "fixture@localhost",
    "GIT_AUTHOR_DATE": "2017-05-30T00:00:00 +0000",
    "GIT_COMMITTER_DATE": "2017-05-30T00:00:00 +0000",
}


def _git(repo: Path, *args: str) -> str:
    proc = subprocess.run(
        ["git", *args],
        cwd=str(repo),
        env={**os.environ, **_GIT_ENV},
        capture_output=True,
        text=True,
        check=True,
    )
    return proc.stdout.strip()


def write_minibuild_project(root: Path, name: str, sources: dict[str, str],
                            extra_manifest: dict | None = None) -> None:
    """Lay down a minibuild project: project.manifest plus src/*.ml files."""
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "name": name,
        "build_tool": "fixture-minibuild",
        "sources": sorted(sources),
        **(extra_manifest or {}),
    }
    (root / "project.manifest").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for rel, text in sources.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def init_repo(repo: Path, name: str, sources: dict[str, str],
              extra_manifest: dict | None = None) -> str:
    repo.mkdir(parents=True)
    _git(repo, "init", "--quiet", "--initial-branch=main")
    write_minibuild_project(repo, name, sources, extra_manifest)
    _git(repo, "add", "-A")
    _git(repo, "commit", "--quiet", "-m", "initial fixture state")
    return _git(repo, "rev-parse", "HEAD")


def commit_on_branch(repo: Path, branch: str, files: dict[str, str],
                     message: str = "fixture change") -> str:
    _git(repo, "checkout", "--quiet", "-b", branch)
    for rel, text in files.items():
        path = repo / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    _git(repo, "add", "-A")
    _git(repo, "commit", "--quiet", "-m", message)
    sha = _git(repo, "rev-parse", "HEAD")
    _git(repo, "checkout", "--quiet", "main")
    return sha


CALC_SRC = """fn add(a, b) {
    return a + b;
}

fn test_add() {
    assert add(1, 2) == 3;
}
"""

BROKEN_SRC = """fn main() {
    let x = 1;
"""

NO_TESTS_SRC = """fn helper() {
    return 1;
}
"""

CALM_SRC = """fn twice(x) {
    return x * 2;
}

fn test_twice() {
    assert twice(2) == 4;
}

fn test_zero() {
    assert twice(0) == 0;
}
"""

# fix-1 shape: the dereferenced variable is non-null on passing runs, so the
# skip guard preserves them while the unguarded default-value insert clobbers.
NPE_SRC = """fn norm(r) {
    let v = 0;
    v = r.val;
    if (v < 0) {
        v = 0 - v;
    }
    return v;
}

fn test_pos() {
    assert norm({val: 5}) == 5;
}

fn test_neg() {
    assert norm({val: 0 - 3}) == 3;
}

fn test_null() {
    assert norm(null) == 0;
}
"""

COND_BASE_SRC = """fn sanity() {
    return 1;
}

fn test_sanity() {
    assert sanity() == 1;
}
"""

# the PR head adds this buggy module: `x < 0` should accept zero (`x <= 0`)
COND_EXTRA_SRC = """fn non_pos(x) {
    if (x < 0) {
        return true;
    }
    return false;
}

fn test_zero() {
    assert non_pos(0);
}

fn test_neg() {
    assert non_pos(0 - 1);
}

fn test_pos() {
    assert !non_pos(5);
}
"""

FAILING_LOG = """[INFO] fetching dependencies
[INFO] compiling 1 source file
[ERROR] test run finished with failures
Tests run: 3, Failures: 1, Errors: 0, Skipped: 0
"""

NPE_LOG = """[INFO] module core
Tests run: 1, Failures: 0, Errors: 0, Skipped: 0
[INFO] module app
[ERROR] test run finished with errors
Tests run: 3, Failures: 0, Errors: 1, Skipped: 0
"""

PASSING_LOG = """[INFO] all green
Tests run: 2, Failures: 0, Errors: 0, Skipped: 0
"""


def _project(slug: str, stars: int = 120) -> dict:
    return {
        "host_id": f"host-{slug.replace('/', '-')}",
        "slug": slug,
        "default_branch": "main",
        "stars": stars,
        "last_activity": "2017-05-30T00:00:00+00:00",
        "language_tag": "minilang",
        "build_tool_tag": "fixture-minibuild",
        "ci_enabled": True,
    }


def _ts(hour: int, minute: int) -> str:
    return NOW.replace(hour=hour, minute=minute).isoformat()


@dataclass
class FeedSpec:
    root: Path
    now: datetime = NOW
    window_start: datetime = WINDOW_START
    window_end: datetime = WINDOW_END
    expected_outcomes: dict[str, str] = field(default_factory=dict)
    expected_interesting: tuple[str, ...] = ()
    merge_tree: str = ""
    build_times: dict[str, datetime] = field(default_factory=dict)


def build_fixture_feed(root: Path) -> FeedSpec:
    root = Path(root)
    repos = root / "repos"
    logs = root / "logs"
    logs.mkdir(parents=True, exist_ok=True)

    calc_sha = init_repo(repos / "calc", "calc", {"src/main.ml": CALC_SRC})
    broken_sha = init_repo(repos / "brokensyntax", "brokensyntax", {"src/main.ml": BROKEN_SRC})
    notests_sha = init_repo(repos / "notests", "notests", {"src/main.ml": NO_TESTS_SRC})
    calm_sha = init_repo(repos / "calm", "calm", {"src/main.ml": CALM_SRC})
    npe_sha = init_repo(repos / "npebug", "npebug", {"src/main.ml": NPE_SRC})

    cond_repo = repos / "condbug"
    base_sha = init_repo(cond_repo, "condbug", {"src/main.ml": COND_BASE_SRC})
    head_manifest = {
        "name": "condbug",
        "build_tool": "fixture-minibuild",
        "sources": ["src/extra.ml", "src/main.ml"],
    }
    head_sha = commit_on_branch(cond_repo, "feature", {
        "src/extra.ml": COND_EXTRA_SRC,
        "project.manifest": json.dumps(head_manifest, indent=2, sort_keys=True) + "\n",
    }, "add non_pos helper")
    # record the tree the CI built: merge head into base, note the tree hash,
    # then park the merge commit (unreferenced, detached HEAD)
    _git(cond_repo, "checkout", "--quiet", "--detach", base_sha)
    _git(cond_repo, "merge", "--quiet", "--no-ff", "-m", "ci merge", head_sha)
    merge_tree = _git(cond_repo, "rev-parse", "HEAD^{tree}")
    _git(cond_repo, "checkout", "--quiet", "main")

    log_files = {
        "b1-clone": FAILING_LOG,
        "b2-checkout": FAILING_LOG,
        "b3-compile": FAILING_LOG,
        "b4-harness": FAILING_LOG,
        "b5-flaky": FAILING_LOG,
        "b6-npe": NPE_LOG,
        "b7-cond": FAILING_LOG,
        "b8-pass": PASSING_LOG,
    }
    for build_id, text in log_files.items():
        (logs / f"{build_id}.log").write_text(text)

    builds = [
        {
            "build_id": "b1-clone", "project": "acme/ghost", "trigger": "push",
            "commit_id": "0" * 40, "ci_status": "failed",
            "finished_at": _ts(9, 0), "log": "logs/b1-clone.log",
            "repo": "repos/ghost", "failing_tests": 1,
        },
        {
            "build_id": "b2-checkout", "project": "acme/calc", "trigger": "push",
            "commit_id": "d" * 40, "ci_status": "failed",
            "finished_at": _ts(9, 20), "log": "logs/b2-checkout.log",
            "repo": "repos/calc",
        },
        {
            "build_id": "b3-compile", "project": "acme/brokensyntax", "trigger": "push",
            "commit_id": broken_sha, "ci_status": "failed",
            "finished_at": _ts(9, 40), "log": "logs/b3-compile.log",
            "repo": "repos/brokensyntax",
        },
        {
            "build_id": "b4-harness", "project": "acme/notests", "trigger": "push",
            "commit_id": notests_sha, "ci_status": "failed",
            "finished_at": _ts(10, 0), "log": "logs/b4-harness.log",
            "repo": "repos/notests",
        },
        {
            "build_id": "b5-flaky", "project": "acme/calm", "trigger": "push",
            "commit_id": calm_sha, "ci_status": "failed",
            "finished_at": _ts(10, 20), "log": "logs/b5-flaky.log",
            "repo": "repos/calm",
        },
        {
            "build_id": "b6-npe", "project": "acme/npebug", "trigger": "push",
            "commit_id": npe_sha, "ci_status": "failed",
            "finished_at": _ts(10, 40), "log": "logs/b6-npe.log",
            "repo": "repos/npebug",
        },
        {
            "build_id": "b7-cond", "project": "acme/condbug", "trigger": "pull_request",
            "commit_id": base_sha, "pr_base_commit": base_sha, "pr_head_commit": head_sha,
            "ci_status": "failed", "finished_at": _ts(11, 0),
            "log": "logs/b7-cond.log", "repo": "repos/condbug",
            "ci_merge_tree": merge_tree,
        },
        {
            "build_id": "b8-pass", "project": "acme/calm", "trigger": "push",
            "commit_id": calm_sha, "ci_status": "passed",
            "finished_at": _ts(11, 20), "log": "logs/b8-pass.log",
            "repo": "repos/calm",
        },
    ]
    manifest = {
        "projects": [
            _project("acme/ghost", 50),
            _project("acme/calc", 200),
            _project("acme/brokensyntax", 75),
            _project("acme/notests", 30),
            _project("acme/calm", 400),
            _project("acme/npebug", 150),
            _project("acme/condbug", 90),
        ],
        "builds": builds,
    }
    (root / "feed.manifest").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    return FeedSpec(
        root=root,
        expected_outcomes={
            "b1-clone": "clone_error",
            "b2-checkout": "checkout_error",
            "b3-compile": "compile_error",
            "b4-harness": "harness_error",
            "b5-flaky": "not_reproduced",
            "b6-npe": "reproduced",
            "b7-cond": "reproduced",
        },
        expected_interesting=(
            "b1-clone", "b2-checkout", "b3-compile", "b4-harness",
            "b5-flaky", "b6-npe", "b7-cond",
        ),
        merge_tree=merge_tree,
        build_times={b["build_id"]: datetime.fromisoformat(b["finished_at"]) for b in builds},
    )


if __name__ == "__main__":
    if len(sys.argv) != 2:
        print("usage: python3 tests/fixture_feed.py <target-dir>", file=sys.stderr)
        raise SystemExit(2)
    target = Path(sys.argv[1])
    if target.exists() and any(target.iterdir()):
        print(f"refusing to write into non-empty {target}", file=sys.stderr)
        raise SystemExit(2)
    spec = build_fixture_feed(target)
    print(f"fixture feed written to {spec.root}")
    print(f"scan window: {spec.window_start.isoformat()} .. {spec.window_end.isoformat()}")
