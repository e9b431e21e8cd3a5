"""The finite predicate space the condition synthesizer searches.

Atoms over in-scope variables — ``v == null``, ``v != null``, ``v == c``,
``v < c``, ``v == w``, ``v < w``, ``true``, ``false`` — with the constant
pool {0, 1, -1} plus constants observed in snapshots; composites are single
negations and one-level conjunctions/disjunctions of two atoms.

Canonical enumeration order (first-consistent-wins depends on it): atom
kinds in the order above, variables in declaration order, constants
ascending; then all negations, all conjunctions, all disjunctions over atom
pairs (i < j).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from ..minilang.interp import Interpreter, MiniError, Snapshot, Value
from ..minilang.nodes import (
    Binary,
    BoolLit,
    Expr,
    Ident,
    IntLit,
    NullLit,
    Program,
    Unary,
)

BASE_CONSTANTS = (0, 1, -1)


def _const_expr(value: int) -> Expr:
    if value < 0:
        return Unary("-", IntLit(-value))
    return IntLit(value)


@dataclass(frozen=True)
class TemplateSpace:
    variables: tuple[str, ...]  # declaration order
    constants: tuple[int, ...]  # ascending

    @classmethod
    def for_snapshots(cls, snapshots: Iterable[Mapping[str, Value]]) -> "TemplateSpace":
        """Variables common to every snapshot (a predicate must evaluate at
        runtime on all of them), constants from the base pool plus observed
        int values."""
        snapshots = list(snapshots)
        if not snapshots:
            return cls((), tuple(sorted(BASE_CONSTANTS)))
        common = set(snapshots[0])
        for bindings in snapshots[1:]:
            common &= set(bindings)
        variables = tuple(name for name in snapshots[0] if name in common)
        observed = {
            value
            for bindings in snapshots
            for value in bindings.values()
            if type(value) is int
        }
        constants = tuple(sorted(set(BASE_CONSTANTS) | observed))
        return cls(variables, constants)

    def atoms(self) -> list[Expr]:
        out: list[Expr] = []
        null = NullLit()
        for v in self.variables:
            out.append(Binary("==", Ident(v), null))
        for v in self.variables:
            out.append(Binary("!=", Ident(v), null))
        for v in self.variables:
            for c in self.constants:
                out.append(Binary("==", Ident(v), _const_expr(c)))
        for v in self.variables:
            for c in self.constants:
                out.append(Binary("<", Ident(v), _const_expr(c)))
        for i, v in enumerate(self.variables):
            for w in self.variables[i + 1:]:
                out.append(Binary("==", Ident(v), Ident(w)))
        for v in self.variables:
            for w in self.variables:
                if v != w:
                    out.append(Binary("<", Ident(v), Ident(w)))
        out.append(BoolLit(True))
        out.append(BoolLit(False))
        return out

    def predicates(self) -> Iterator[Expr]:
        atoms = self.atoms()
        yield from atoms
        for atom in atoms:
            yield Unary("!", atom)
        for i, left in enumerate(atoms):
            for right in atoms[i + 1:]:
                yield Binary("&&", left, right)
        for i, left in enumerate(atoms):
            for right in atoms[i + 1:]:
                yield Binary("||", left, right)

    def size(self) -> int:
        n = len(self.atoms())
        return n + n + 2 * (n * (n - 1) // 2)


_EMPTY_PROGRAM = Program((), ())


def eval_predicate(pred: Expr, bindings: Mapping[str, Value]) -> bool:
    """Evaluate a predicate over snapshot bindings with interpreter
    semantics; raises MiniError exactly where the patched program would."""
    value = Interpreter(_EMPTY_PROGRAM).eval(pred, dict(bindings))
    if type(value) is not bool:
        raise MiniError("TypeError", "predicate did not evaluate to a bool")
    return value
