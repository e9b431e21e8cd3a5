"""minilang: the deterministic fixture language the repair tools operate on.

A tiny imperative language with records and null, a tree-walking interpreter
with statement coverage and value-snapshot hooks, and a test runner emitting
the XML report subset.
"""

from .interp import (
    ExecutionTrace,
    FailureInfo,
    Hooks,
    Interpreter,
    MiniError,
    Record,
    Snapshot,
    TestOutcome,
    run_test,
)
from .nodes import (
    Assert,
    Assign,
    Binary,
    BoolLit,
    Call,
    Expr,
    ExprStmt,
    FieldAccess,
    Function,
    Ident,
    If,
    IntLit,
    Let,
    NullLit,
    Program,
    RecordLit,
    Return,
    SourceFile,
    Span,
    Stmt,
    Unary,
    While,
    expr_source,
    stmt_source,
    to_source,
)
from .parser import MiniSyntaxError, parse, parse_project
from .suite import NoTestsError, SuiteRun, run_suite, trace_text

__all__ = [
    "Assert", "Assign", "Binary", "BoolLit", "Call", "Expr", "ExprStmt",
    "ExecutionTrace", "FailureInfo", "FieldAccess", "Function", "Hooks",
    "Ident", "If", "IntLit", "Interpreter", "Let", "MiniError",
    "MiniSyntaxError", "NoTestsError", "NullLit", "Program", "Record",
    "RecordLit", "Return", "Snapshot", "SourceFile", "Span", "Stmt",
    "SuiteRun", "TestOutcome", "Unary", "While", "expr_source", "parse",
    "parse_project", "run_suite", "run_test", "stmt_source", "to_source",
    "trace_text",
]
