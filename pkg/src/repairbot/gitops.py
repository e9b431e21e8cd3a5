"""Thin wrappers around the git CLI used by feeds, reproduction, and triage."""

from __future__ import annotations

import subprocess
from pathlib import Path
from typing import Optional, Sequence, Union


class GitError(RuntimeError):
    def __init__(self, args: Sequence[str], returncode: int, stderr: str):
        super().__init__(f"git {' '.join(args)} failed ({returncode}): {stderr.strip()}")
        self.returncode = returncode
        self.stderr = stderr


_IDENTITY = [
    "-c", "user.name=repairbot",
    "-c", "user.email=repairbot@localhost",
]


def run_git(args: Sequence[str], cwd: Optional[Union[str, Path]] = None,
            check: bool = True, timeout: float = 120.0) -> subprocess.CompletedProcess:
    proc = subprocess.run(
        ["git", *_IDENTITY, *args],
        cwd=str(cwd) if cwd else None,
        capture_output=True,
        text=True,
        timeout=timeout,
    )
    if check and proc.returncode != 0:
        raise GitError(args, proc.returncode, proc.stderr)
    return proc


def clone(repo: Union[str, Path], dest: Union[str, Path], timeout: float = 120.0) -> None:
    run_git(["clone", "--quiet", str(repo), str(dest)], timeout=timeout)


def checkout(repo_dir: Union[str, Path], rev: str) -> None:
    run_git(["checkout", "--quiet", rev], cwd=repo_dir)


def merge(repo_dir: Union[str, Path], rev: str, message: str = "ci merge") -> None:
    run_git(["merge", "--quiet", "--no-ff", "-m", message, rev], cwd=repo_dir)


def commit_exists(repo_dir: Union[str, Path], sha: str) -> bool:
    proc = run_git(["cat-file", "-e", f"{sha}^{{commit}}"], cwd=repo_dir, check=False)
    return proc.returncode == 0


def tree_hash(repo_dir: Union[str, Path], rev: str = "HEAD") -> str:
    proc = run_git(["rev-parse", f"{rev}^{{tree}}"], cwd=repo_dir)
    return proc.stdout.strip()


def rev_parse(repo_dir: Union[str, Path], rev: str = "HEAD") -> str:
    proc = run_git(["rev-parse", rev], cwd=repo_dir)
    return proc.stdout.strip()
