"""Spectrum-based fault localization over per-test coverage."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from ..minilang.interp import ExecutionTrace
from ..model import ContractViolation


@dataclass(frozen=True)
class CoverageMatrix:
    """Per-statement failing/passing coverage counts.

    ef/ep: how many failing/passing tests cover each statement;
    total_failing (F) and total_passing (P) are the suite-level counts.
    """

    ef: Mapping[int, int]
    ep: Mapping[int, int]
    total_failing: int
    total_passing: int

    def __post_init__(self) -> None:
        for stmt_id, count in self.ef.items():
            if not 0 <= count <= self.total_failing:
                raise ValueError(f"ef[{stmt_id}]={count} outside 0..F")
        for stmt_id, count in self.ep.items():
            if not 0 <= count <= self.total_passing:
                raise ValueError(f"ep[{stmt_id}]={count} outside 0..P")

    def nf(self, stmt_id: int) -> int:
        return self.total_failing - self.ef.get(stmt_id, 0)

    @classmethod
    def from_traces(cls, traces: Iterable[ExecutionTrace], stmt_count: int) -> "CoverageMatrix":
        ef = {stmt_id: 0 for stmt_id in range(stmt_count)}
        ep = {stmt_id: 0 for stmt_id in range(stmt_count)}
        failing = passing = 0
        for trace in traces:
            bucket = ep if trace.passed else ef
            if trace.passed:
                passing += 1
            else:
                failing += 1
            for stmt_id in trace.covered:
                if stmt_id in bucket:
                    bucket[stmt_id] += 1
        return cls(ef=ef, ep=ep, total_failing=failing, total_passing=passing)


def ochiai(matrix: CoverageMatrix) -> list[tuple[int, float]]:
    """Rank statements by ef / sqrt(F * (ef + ep)), descending.

    Scores are in [0, 1]; ef = 0 scores 0; ties break by ascending stmt_id.
    """
    if matrix.total_failing < 1:
        raise ContractViolation("ochiai needs at least one failing test")
    scores = []
    for stmt_id in sorted(set(matrix.ef) | set(matrix.ep)):
        ef = matrix.ef.get(stmt_id, 0)
        ep = matrix.ep.get(stmt_id, 0)
        if ef == 0:
            score = 0.0
        else:
            score = ef / math.sqrt(matrix.total_failing * (ef + ep))
        scores.append((stmt_id, score))
    scores.sort(key=lambda pair: (-pair[1], pair[0]))
    return scores
