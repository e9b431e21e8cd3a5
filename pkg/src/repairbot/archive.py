"""Append-only archival of builds, attempts, patches, and verdicts, plus the
statistics that reproduce the archival tables.

Storage is one JSON record per line in a single file per archive; records
are never mutated or deleted, the sequence number is monotonic (it survives
process restarts), and a reader tolerates a truncated final line so a killed
writer can never corrupt what was already durable.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .model import Outcome, RunStatistics, normalize_ts, ts_from_str, ts_to_str, utc_now

SCHEMA_VERSION = 1


class ArchiveError(RuntimeError):
    pass


class ArchiveCorrupt(ArchiveError):
    """A complete archive line failed to parse."""


class SchemaViolation(ValueError):
    """Payload does not match its kind's schema."""


class RecordKind(str, Enum):
    BUILD = "build"
    REPRODUCTION = "reproduction"
    PATCH = "patch"
    VERDICT = "verdict"
    RUN = "run"


_REQUIRED_FIELDS: dict[RecordKind, frozenset[str]] = {
    RecordKind.BUILD: frozenset(
        {"build_id", "project", "trigger", "ci_status", "finished_at", "interesting"}),
    RecordKind.REPRODUCTION: frozenset(
        {"build_id", "project", "outcome", "tests_run", "tests_failed",
         "signatures", "wall_time", "workspace_id"}),
    RecordKind.PATCH: frozenset(
        {"patch_id", "build_id", "project", "tool_name", "edit", "adequate",
         "overfitting_flags", "created_at"}),
    RecordKind.VERDICT: frozenset(
        {"patch_id", "verdict", "analyst_id", "note", "decided_at"}),
    RecordKind.RUN: frozenset(
        {"run_id", "window_start", "window_end", "builds_collected",
         "ci_failing", "interesting", "outcomes", "patches_found"}),
}


@dataclass(frozen=True)
class ArchiveRecord:
    seq: int
    kind: RecordKind
    schema_version: int
    written_at: datetime
    payload: Mapping

    def to_line(self) -> str:
        doc = {
            "seq": self.seq,
            "kind": self.kind.value,
            "schema_version": self.schema_version,
            "written_at": ts_to_str(self.written_at),
            "payload": self.payload,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_line(cls, line: str) -> "ArchiveRecord":
        try:
            doc = json.loads(line)
            return cls(
                seq=int(doc["seq"]),
                kind=RecordKind(doc["kind"]),
                schema_version=int(doc["schema_version"]),
                written_at=ts_from_str(doc["written_at"]),
                payload=doc["payload"],
            )
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise ArchiveCorrupt(f"unparseable archive line: {exc}") from exc


def validate_payload(kind: RecordKind, payload: Mapping) -> None:
    if not isinstance(payload, Mapping):
        raise SchemaViolation(f"{kind.value} payload must be an object")
    missing = _REQUIRED_FIELDS[kind] - set(payload)
    if missing:
        raise SchemaViolation(f"{kind.value} payload missing {sorted(missing)}")


def iter_archive(path: Path) -> Iterator[ArchiveRecord]:
    """Yield every complete record; a partial trailing line (a writer died
    mid-write) is ignored, anything else unparseable raises ArchiveCorrupt."""
    path = Path(path)
    if not path.exists():
        return
    data = path.read_text(encoding="utf-8")
    lines = data.split("\n")
    complete = lines[:-1]  # data ending in \n leaves '' at the end; else drops the partial tail
    for line in complete:
        if line:
            yield ArchiveRecord.from_line(line)


def read_archive(path: Path) -> list[ArchiveRecord]:
    return list(iter_archive(path))


class Archive:
    """Serialized single-writer over one line-delimited file.

    Appends are atomic at line granularity: each record is one write() of
    the full line, flushed before the sequence number is handed back.
    """

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        last_seq = 0
        for record in iter_archive(self.path):
            last_seq = max(last_seq, record.seq)
        self._next_seq = last_seq + 1
        self._handle = open(self.path, "ab")

    def append(self, kind: RecordKind, payload: Mapping,
               written_at: Optional[datetime] = None) -> int:
        validate_payload(kind, payload)
        with self._lock:
            record = ArchiveRecord(
                seq=self._next_seq,
                kind=kind,
                schema_version=SCHEMA_VERSION,
                written_at=written_at or utc_now(),
                payload=dict(payload),
            )
            self._handle.write((record.to_line() + "\n").encode("utf-8"))
            self._handle.flush()
            os.fsync(self._handle.fileno())
            self._next_seq += 1
            return record.seq

    def records(self) -> list[ArchiveRecord]:
        with self._lock:
            self._handle.flush()
        return read_archive(self.path)

    def close(self) -> None:
        with self._lock:
            self._handle.close()


# -- statistics -----------------------------------------------------------


def round2(value) -> Decimal:
    return Decimal(value).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def share(part: int, whole: int) -> float:
    """Percentage with half-up rounding to 2 decimals, as in the tables."""
    if whole == 0:
        return 0.0
    return float(round2(Decimal(part * 100) / Decimal(whole)))


def taxonomy_percentages(outcomes: Mapping[str, int]) -> dict[str, float]:
    total = sum(outcomes.values())
    return {bucket: share(count, total) for bucket, count in outcomes.items()}


def _in_window(record: ArchiveRecord, start: Optional[datetime], end: Optional[datetime]) -> bool:
    if start is not None and record.written_at < start:
        return False
    if end is not None and record.written_at >= end:
        return False
    return True


def _bump(mapping: dict[str, dict[str, int]], slug: str, key: str, by: int = 1) -> None:
    mapping.setdefault(slug, {})
    mapping[slug][key] = mapping[slug].get(key, 0) + by


def compute_statistics(
    records: Iterable[ArchiveRecord],
    window_start: Optional[datetime] = None,
    window_end: Optional[datetime] = None,
    run_id: str = "replay",
) -> RunStatistics:
    """Deterministic counters over the records whose written_at falls in
    [window_start, window_end); open bounds when omitted."""
    records = [r for r in records if _in_window(r, window_start, window_end)]
    builds = ci_failing = interesting = patches_found = 0
    outcomes = {bucket.value: 0 for bucket in Outcome}
    per_project: dict[str, dict[str, int]] = {}
    per_signature: dict[str, int] = {}
    builds_with_patches: dict[str, set[str]] = {}
    for record in records:
        payload = record.payload
        slug = payload.get("project", "")
        if record.kind is RecordKind.BUILD:
            builds += 1
            _bump(per_project, slug, "builds")
            if payload.get("ci_status") == "failed":
                ci_failing += 1
                _bump(per_project, slug, "ci_failing")
            if payload.get("interesting"):
                interesting += 1
                _bump(per_project, slug, "interesting")
                if payload.get("trigger") == "pull_request":
                    _bump(per_project, slug, "pr_interesting")
        elif record.kind is RecordKind.REPRODUCTION:
            outcome = payload.get("outcome", "")
            if outcome in outcomes:
                outcomes[outcome] += 1
            if outcome == Outcome.REPRODUCED.value:
                _bump(per_project, slug, "reproduced")
            for signature in payload.get("signatures", []):
                name = signature.get("exception_type", "")
                per_signature[name] = per_signature.get(name, 0) + 1
        elif record.kind is RecordKind.PATCH:
            if payload.get("adequate"):
                patches_found += 1
                _bump(per_project, slug, "patches")
                _bump(per_project, slug, f"patches:{payload.get('tool_name', '?')}")
                builds_with_patches.setdefault(slug, set()).add(payload.get("build_id", ""))
    for slug, build_ids in builds_with_patches.items():
        _bump(per_project, slug, "builds_with_patches", by=len(build_ids))
    if not records:
        span_start = window_start or utc_now()
        span_end = window_end or span_start
    else:
        span_start = window_start or min(r.written_at for r in records)
        span_end = window_end or max(r.written_at for r in records) + timedelta(seconds=1)
    return RunStatistics(
        run_id=run_id,
        window_start=normalize_ts(span_start),
        window_end=normalize_ts(span_end),
        builds_collected=builds,
        ci_failing=ci_failing,
        interesting=interesting,
        outcomes=outcomes,
        patches_found=patches_found,
        per_project=per_project,
        per_signature=per_signature,
    )


def merge_statistics(first: RunStatistics, second: RunStatistics, run_id: str = "merged") -> RunStatistics:
    """Counter-wise sum; used to check window additivity and for cumulative
    reporting."""
    outcomes = {k: first.outcomes.get(k, 0) + second.outcomes.get(k, 0)
                for k in set(first.outcomes) | set(second.outcomes)}
    per_project: dict[str, dict[str, int]] = {}
    for source in (first.per_project, second.per_project):
        for slug, counters in source.items():
            for key, value in counters.items():
                _bump(per_project, slug, key, by=value)
    per_signature: dict[str, int] = {}
    for source in (first.per_signature, second.per_signature):
        for key, value in source.items():
            per_signature[key] = per_signature.get(key, 0) + value
    return RunStatistics(
        run_id=run_id,
        window_start=min(first.window_start, second.window_start),
        window_end=max(first.window_end, second.window_end),
        builds_collected=first.builds_collected + second.builds_collected,
        ci_failing=first.ci_failing + second.ci_failing,
        interesting=first.interesting + second.interesting,
        outcomes=outcomes,
        patches_found=first.patches_found + second.patches_found,
        per_project=per_project,
        per_signature=per_signature,
    )


# -- table-shaped reports -------------------------------------------------

SIGNATURE_TABLE_TOP = 10


@dataclass(frozen=True)
class Table:
    name: str
    header: tuple[str, ...]
    rows: tuple[tuple, ...]
    footer: tuple[tuple, ...] = ()

    def all_rows(self) -> list[tuple]:
        return list(self.rows) + list(self.footer)


def _project_table(stats: RunStatistics) -> Table:
    rows = []
    for slug, c in stats.per_project.items():
        failing = c.get("interesting", 0)
        if failing == 0:
            continue
        pr = c.get("pr_interesting", 0)
        rows.append((slug, failing, pr, share(pr, failing)))
    rows.sort(key=lambda r: (-r[1], r[0]))
    total_failing = sum(r[1] for r in rows)
    total_pr = sum(r[2] for r in rows)
    footer = (("Total", total_failing, total_pr, share(total_pr, total_failing)),)
    return Table("projects", ("project", "failing_builds", "pr_builds", "pct_pr"),
                 tuple(rows), footer)


def _reproduction_table(stats: RunStatistics) -> Table:
    rows = []
    for slug, c in stats.per_project.items():
        failing = c.get("interesting", 0)
        reproduced = c.get("reproduced", 0)
        if failing == 0 and reproduced == 0:
            continue
        rows.append((slug, failing, reproduced, share(reproduced, failing)))
    rows.sort(key=lambda r: (-r[2], r[0]))
    total_failing = sum(r[1] for r in rows)
    total_reproduced = sum(r[2] for r in rows)
    footer = (("Total", total_failing, total_reproduced,
               share(total_reproduced, total_failing)),)
    return Table("reproduction", ("project", "failing_builds", "reproduced", "pct_reproduced"),
                 tuple(rows), footer)


def _patch_table(stats: RunStatistics) -> Table:
    tools = sorted({
        key.split(":", 1)[1]
        for counters in stats.per_project.values()
        for key in counters
        if key.startswith("patches:")
    })
    header = ("project", "builds_with_patches", *(f"{tool}_patches" for tool in tools))
    rows = []
    for slug, c in stats.per_project.items():
        if c.get("patches", 0) == 0:
            continue
        rows.append((slug, c.get("builds_with_patches", 0),
                     *(c.get(f"patches:{tool}", 0) for tool in tools)))
    rows.sort(key=lambda r: (-r[1], r[0]))
    footer = (("Total",
               sum(r[1] for r in rows),
               *(sum(r[2 + i] for r in rows) for i in range(len(tools)))),)
    return Table("patches", header, tuple(rows), footer)


def _signature_table(stats: RunStatistics) -> Table:
    ordered = sorted(stats.per_signature.items(), key=lambda kv: (-kv[1], kv[0]))
    top = ordered[:SIGNATURE_TABLE_TOP]
    subtotal = sum(count for _, count in top)
    total = sum(stats.per_signature.values())
    footer = (
        ("Subtotal", subtotal),
        ("Other", total - subtotal),
        ("Total", total),
    )
    return Table("signatures", ("exception", "occurrences"), tuple(top), footer)


def build_tables(stats: RunStatistics) -> list[Table]:
    return [
        _project_table(stats),
        _reproduction_table(stats),
        _patch_table(stats),
        _signature_table(stats),
    ]


def export_report(stats: RunStatistics, fmt: str) -> str:
    """CSV or structured-document rendering of the four table shapes."""
    tables = build_tables(stats)
    if fmt == "doc":
        doc = {
            table.name: {
                "header": list(table.header),
                "rows": [list(r) for r in table.rows],
                "footer": [list(r) for r in table.footer],
            }
            for table in tables
        }
        doc["run"] = stats.to_payload()
        return json.dumps(doc, indent=2, sort_keys=True)
    if fmt == "csv":
        sections = []
        for table in tables:
            lines = [f"# table: {table.name}", ",".join(table.header)]
            lines += [",".join(str(v) for v in row) for row in table.all_rows()]
            sections.append("\n".join(lines))
        return "\n\n".join(sections) + "\n"
    raise ValueError(f"unknown report format {fmt!r} (expected csv or doc)")
