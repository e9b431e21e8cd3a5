"""AST node types and the canonical source printer for minilang.

Statements carry dense pre-order ``stmt_id``s (0..N-1 across the whole
program) plus character spans into their source file, which is what lets the
repair tools do precise textual surgery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union


@dataclass(frozen=True)
class Span:
    """Character offsets [start, end) and the 1-based start line in a file."""

    start: int
    end: int
    line: int


_NO_SPAN = Span(0, 0, 0)


@dataclass(eq=True)
class Node:
    span: Span = field(default=_NO_SPAN, compare=False, kw_only=True)


# --- expressions ---------------------------------------------------------


@dataclass(eq=True)
class IntLit(Node):
    value: int


@dataclass(eq=True)
class BoolLit(Node):
    value: bool


@dataclass(eq=True)
class NullLit(Node):
    pass


@dataclass(eq=True)
class Ident(Node):
    name: str


@dataclass(eq=True)
class RecordLit(Node):
    fields: tuple[tuple[str, "Expr"], ...]


@dataclass(eq=True)
class FieldAccess(Node):
    obj: "Expr"
    name: str


@dataclass(eq=True)
class Call(Node):
    name: str
    args: tuple["Expr", ...]


@dataclass(eq=True)
class Unary(Node):
    op: str  # "!" or "-"
    operand: "Expr"


@dataclass(eq=True)
class Binary(Node):
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[IntLit, BoolLit, NullLit, Ident, RecordLit, FieldAccess, Call, Unary, Binary]


# --- statements ----------------------------------------------------------


@dataclass(eq=True)
class Stmt(Node):
    stmt_id: int = field(default=-1, compare=False, kw_only=True)


@dataclass(eq=True)
class Let(Stmt):
    name: str
    value: Expr


@dataclass(eq=True)
class Assign(Stmt):
    """``x = e;`` or ``x.f.g = e;`` — target is the dotted path."""

    target: tuple[str, ...]
    value: Expr


@dataclass(eq=True)
class If(Stmt):
    cond: Expr
    then_body: tuple[Stmt, ...]
    else_body: tuple[Stmt, ...]


@dataclass(eq=True)
class While(Stmt):
    cond: Expr
    body: tuple[Stmt, ...]


@dataclass(eq=True)
class Return(Stmt):
    value: Optional[Expr]


@dataclass(eq=True)
class Assert(Stmt):
    value: Expr


@dataclass(eq=True)
class ExprStmt(Stmt):
    value: Expr


@dataclass(eq=True)
class Function(Node):
    name: str
    params: tuple[str, ...]
    body: tuple[Stmt, ...]
    file_path: str = field(default="<src>", compare=False)

    def is_test(self) -> bool:
        return self.name.startswith("test_")


@dataclass
class SourceFile:
    path: str
    text: str


@dataclass
class Program:
    functions: tuple[Function, ...]
    files: tuple[SourceFile, ...]

    def __post_init__(self) -> None:
        self._by_id: dict[int, tuple[Stmt, Function]] = {}
        for fn in self.functions:
            for stmt in iter_stmts(fn.body):
                self._by_id[stmt.stmt_id] = (stmt, fn)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Program) and self.functions == other.functions

    @property
    def stmt_count(self) -> int:
        return len(self._by_id)

    def stmt(self, stmt_id: int) -> Stmt:
        return self._by_id[stmt_id][0]

    def function_of(self, stmt_id: int) -> Function:
        return self._by_id[stmt_id][1]

    def function(self, name: str) -> Optional[Function]:
        for fn in self.functions:
            if fn.name == name:
                return fn
        return None

    def test_names(self) -> list[str]:
        return [fn.name for fn in self.functions if fn.is_test()]

    def file_text(self, path: str) -> str:
        for f in self.files:
            if f.path == path:
                return f.text
        raise KeyError(path)

    def file_texts(self) -> dict[str, str]:
        return {f.path: f.text for f in self.files}


def iter_stmts(body: Sequence[Stmt]):
    """Pre-order walk over statements, matching stmt_id assignment order."""
    for stmt in body:
        yield stmt
        if isinstance(stmt, If):
            yield from iter_stmts(stmt.then_body)
            yield from iter_stmts(stmt.else_body)
        elif isinstance(stmt, While):
            yield from iter_stmts(stmt.body)


def assign_stmt_ids(functions: Sequence[Function]) -> int:
    """Number every statement 0..N-1 in pre-order; returns N."""
    next_id = 0
    for fn in functions:
        for stmt in iter_stmts(fn.body):
            stmt.stmt_id = next_id
            next_id += 1
    return next_id


# --- canonical printer ---------------------------------------------------

_PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
    "+": 4, "-": 4,
    "*": 5, "/": 5,
}
_UNARY_PREC = 6


def expr_source(expr: Expr) -> str:
    return _print_expr(expr, 0)


def _print_expr(expr: Expr, parent_prec: int) -> str:
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, NullLit):
        return "null"
    if isinstance(expr, Ident):
        return expr.name
    if isinstance(expr, RecordLit):
        inner = ", ".join(f"{name}: {_print_expr(v, 0)}" for name, v in expr.fields)
        return "{" + inner + "}"
    if isinstance(expr, FieldAccess):
        return f"{_print_expr(expr.obj, _UNARY_PREC + 1)}.{expr.name}"
    if isinstance(expr, Call):
        return f"{expr.name}({', '.join(_print_expr(a, 0) for a in expr.args)})"
    if isinstance(expr, Unary):
        text = f"{expr.op}{_print_expr(expr.operand, _UNARY_PREC)}"
        return f"({text})" if parent_prec > _UNARY_PREC else text
    if isinstance(expr, Binary):
        prec = _PRECEDENCE[expr.op]
        # comparisons are non-associative in the grammar: a nested comparison
        # operand must be parenthesized to re-parse identically
        left_prec = prec + 1 if prec == 3 else prec
        left = _print_expr(expr.left, left_prec)
        right = _print_expr(expr.right, prec + 1)
        text = f"{left} {expr.op} {right}"
        return f"({text})" if parent_prec > prec else text
    raise TypeError(f"not an expression node: {expr!r}")


def stmt_source(stmt: Stmt, indent: int = 0) -> str:
    pad = "    " * indent
    if isinstance(stmt, Let):
        return f"{pad}let {stmt.name} = {expr_source(stmt.value)};"
    if isinstance(stmt, Assign):
        return f"{pad}{'.'.join(stmt.target)} = {expr_source(stmt.value)};"
    if isinstance(stmt, If):
        lines = [f"{pad}if ({expr_source(stmt.cond)}) {{"]
        lines += [stmt_source(s, indent + 1) for s in stmt.then_body]
        if stmt.else_body:
            lines.append(f"{pad}}} else {{")
            lines += [stmt_source(s, indent + 1) for s in stmt.else_body]
        lines.append(f"{pad}}}")
        return "\n".join(lines)
    if isinstance(stmt, While):
        lines = [f"{pad}while ({expr_source(stmt.cond)}) {{"]
        lines += [stmt_source(s, indent + 1) for s in stmt.body]
        lines.append(f"{pad}}}")
        return "\n".join(lines)
    if isinstance(stmt, Return):
        if stmt.value is None:
            return f"{pad}return;"
        return f"{pad}return {expr_source(stmt.value)};"
    if isinstance(stmt, Assert):
        return f"{pad}assert {expr_source(stmt.value)};"
    if isinstance(stmt, ExprStmt):
        return f"{pad}{expr_source(stmt.value)};"
    raise TypeError(f"not a statement node: {stmt!r}")


def to_source(program: Program) -> str:
    """Canonical text of the whole program (file boundaries dropped)."""
    chunks = []
    for fn in program.functions:
        header = f"fn {fn.name}({', '.join(fn.params)}) {{"
        body = [stmt_source(s, 1) for s in fn.body]
        chunks.append("\n".join([header, *body, "}"]))
    return "\n\n".join(chunks) + "\n"
