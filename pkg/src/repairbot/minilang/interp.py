"""Tree-walking interpreter with statement coverage and repair hooks.

The interpreter is deterministic and total: a test run always ends in one of
{pass, assert_fail, null_deref, runtime_error}. Loop/recursion runaways are
cut by a fuel budget so validation of arbitrary patches cannot diverge.

Hooks exist for the repair tools: value snapshots at chosen statements,
forcing an ``if`` condition to a constant truth value (the condition is then
not evaluated, matching the semantics of a condition-replacement patch), and
skipping a non-control statement.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional

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
    Stmt,
    Unary,
    While,
)

FUEL_PER_TEST = 100_000
MAX_CALL_DEPTH = 100


class Record:
    """A mutable record value; equality between records is identity."""

    __slots__ = ("fields",)

    def __init__(self, fields: dict[str, Any]):
        self.fields = fields

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}: {v!r}" for k, v in self.fields.items())
        return "{" + inner + "}"


Value = Any  # int | bool | None | Record


class TestOutcome(str, Enum):
    PASS = "pass"
    ASSERT_FAIL = "assert_fail"
    NULL_DEREF = "null_deref"
    RUNTIME_ERROR = "runtime_error"


@dataclass(frozen=True)
class FailureInfo:
    """Signature-shaped description of why a test did not pass."""

    token: str  # e.g. "AssertFail", "NullDeref", "DivByZero"
    detail: str
    line: Optional[int] = None
    var: Optional[str] = None  # dereferenced variable, when identifiable
    field: Optional[str] = None  # accessed field, for null derefs

    def head_line(self) -> str:
        return f"{self.token}: {self.detail}" if self.detail else self.token


@dataclass(frozen=True)
class Snapshot:
    """In-scope bindings captured just before a statement would execute."""

    stmt_id: int
    bindings: Mapping[str, Value]
    cond_value: Optional[bool] = None  # observed `if` condition, when evaluated


@dataclass(frozen=True)
class Hooks:
    snapshot_at: frozenset[int] = frozenset()
    force_condition: Mapping[int, bool] = field(default_factory=dict)
    skip_stmts: frozenset[int] = frozenset()


NO_HOOKS = Hooks()


@dataclass(frozen=True)
class ExecutionTrace:
    test_name: str
    covered: frozenset[int]
    snapshots: tuple[Snapshot, ...]
    outcome: TestOutcome
    error_stmt: Optional[int]
    failure: Optional[FailureInfo]

    @property
    def passed(self) -> bool:
        return self.outcome is TestOutcome.PASS


class MiniError(Exception):
    def __init__(self, token: str, detail: str, line: Optional[int] = None,
                 var: Optional[str] = None, fieldname: Optional[str] = None):
        super().__init__(f"{token}: {detail}")
        self.info = FailureInfo(token, detail, line, var, fieldname)


class _ReturnSignal(Exception):
    def __init__(self, value: Value):
        self.value = value


_OUTCOME_BY_TOKEN = {
    "AssertFail": TestOutcome.ASSERT_FAIL,
    "NullDeref": TestOutcome.NULL_DEREF,
}


class Interpreter:
    """Single-test execution engine; one instance per test run."""

    def __init__(self, program: Program, hooks: Hooks = NO_HOOKS, fuel: int = FUEL_PER_TEST):
        self.program = program
        self.hooks = hooks
        self.fuel = fuel
        self.covered: set[int] = set()
        self.snapshots: list[Snapshot] = []
        self.call_depth = 0
        self.current_stmt: Optional[int] = None
        self._functions = {fn.name: fn for fn in program.functions}

    # -- statements --

    def exec_body(self, body, env: dict[str, Value]) -> None:
        for stmt in body:
            self.exec_stmt(stmt, env)

    def exec_stmt(self, stmt: Stmt, env: dict[str, Value]) -> None:
        self.fuel -= 1
        if self.fuel < 0:
            raise MiniError("FuelExhausted", "statement budget exceeded", stmt.span.line)
        self.current_stmt = stmt.stmt_id
        self.covered.add(stmt.stmt_id)
        snapshot_here = stmt.stmt_id in self.hooks.snapshot_at
        if snapshot_here and not isinstance(stmt, If):
            self._snapshot(stmt.stmt_id, env)
        if stmt.stmt_id in self.hooks.skip_stmts and not isinstance(stmt, (If, While)):
            return
        if isinstance(stmt, Let):
            env[stmt.name] = self.eval(stmt.value, env)
        elif isinstance(stmt, Assign):
            self._assign(stmt, env)
        elif isinstance(stmt, If):
            forced = self.hooks.force_condition.get(stmt.stmt_id)
            if forced is not None:
                if snapshot_here:
                    self._snapshot(stmt.stmt_id, env, cond_value=None)
                value = forced
            else:
                bindings = self._copy_env(env) if snapshot_here else None
                value = self._truth(self.eval(stmt.cond, env), stmt.cond)
                if snapshot_here:
                    self.snapshots.append(Snapshot(stmt.stmt_id, bindings, cond_value=value))
            branch = stmt.then_body if value else stmt.else_body
            self.exec_body(branch, env)
        elif isinstance(stmt, While):
            while True:
                self.current_stmt = stmt.stmt_id
                value = self._truth(self.eval(stmt.cond, env), stmt.cond)
                if not value:
                    break
                self.exec_body(stmt.body, env)
                self.fuel -= 1
                if self.fuel < 0:
                    raise MiniError("FuelExhausted", "loop budget exceeded", stmt.span.line)
                self.covered.add(stmt.stmt_id)
        elif isinstance(stmt, Return):
            raise _ReturnSignal(None if stmt.value is None else self.eval(stmt.value, env))
        elif isinstance(stmt, Assert):
            value = self._truth(self.eval(stmt.value, env), stmt.value)
            if not value:
                raise MiniError("AssertFail", f"assertion failed at line {stmt.span.line}", stmt.span.line)
        elif isinstance(stmt, ExprStmt):
            self.eval(stmt.value, env)
        else:
            raise MiniError("BadNode", f"unknown statement {type(stmt).__name__}", stmt.span.line)

    def _snapshot(self, stmt_id: int, env: dict[str, Value], cond_value: Optional[bool] = None) -> None:
        self.snapshots.append(Snapshot(stmt_id, self._copy_env(env), cond_value))

    @staticmethod
    def _copy_env(env: dict[str, Value]) -> dict[str, Value]:
        return copy.deepcopy(env)

    def _assign(self, stmt: Assign, env: dict[str, Value]) -> None:
        head, *rest = stmt.target
        value = self.eval(stmt.value, env)
        if not rest:
            if head not in env:
                raise MiniError("UnboundVar", f"assignment to undeclared variable {head}", stmt.span.line)
            env[head] = value
            return
        if head not in env:
            raise MiniError("UnboundVar", f"unknown variable {head}", stmt.span.line)
        target = env[head]
        var_name: Optional[str] = head
        for name in rest[:-1]:
            target = self._field_of(target, name, stmt.span.line, var_name)
            var_name = None
        if target is None:
            raise MiniError("NullDeref", f"field {rest[-1]} of null at line {stmt.span.line}",
                            stmt.span.line, var_name, rest[-1])
        if not isinstance(target, Record):
            raise MiniError("TypeError", f"field update on non-record at line {stmt.span.line}", stmt.span.line)
        target.fields[rest[-1]] = value

    # -- expressions --

    def eval(self, expr: Expr, env: dict[str, Value]) -> Value:
        if isinstance(expr, IntLit):
            return expr.value
        if isinstance(expr, BoolLit):
            return expr.value
        if isinstance(expr, NullLit):
            return None
        if isinstance(expr, Ident):
            if expr.name not in env:
                raise MiniError("UnboundVar", f"unbound variable {expr.name}", expr.span.line)
            return env[expr.name]
        if isinstance(expr, RecordLit):
            return Record({name: self.eval(value, env) for name, value in expr.fields})
        if isinstance(expr, FieldAccess):
            obj = self.eval(expr.obj, env)
            var = expr.obj.name if isinstance(expr.obj, Ident) else None
            return self._field_of(obj, expr.name, expr.span.line, var)
        if isinstance(expr, Call):
            return self._call(expr, env)
        if isinstance(expr, Unary):
            return self._unary(expr, env)
        if isinstance(expr, Binary):
            return self._binary(expr, env)
        raise MiniError("BadNode", f"unknown expression {type(expr).__name__}", expr.span.line)

    def _field_of(self, obj: Value, name: str, line: int, var: Optional[str]) -> Value:
        if obj is None:
            raise MiniError("NullDeref", f"field {name} of null at line {line}", line, var, name)
        if not isinstance(obj, Record):
            raise MiniError("TypeError", f"field {name} of non-record at line {line}", line)
        if name not in obj.fields:
            raise MiniError("NoSuchField", f"record has no field {name} at line {line}", line)
        return obj.fields[name]

    def _call(self, expr: Call, env: dict[str, Value]) -> Value:
        fn = self._functions.get(expr.name)
        if fn is None:
            raise MiniError("UnknownFunction", f"no function named {expr.name}", expr.span.line)
        if len(fn.params) != len(expr.args):
            raise MiniError("ArityMismatch",
                            f"{expr.name} takes {len(fn.params)} args, got {len(expr.args)}",
                            expr.span.line)
        args = [self.eval(a, env) for a in expr.args]
        self.call_depth += 1
        if self.call_depth > MAX_CALL_DEPTH:
            self.call_depth -= 1
            raise MiniError("CallDepthExceeded", f"call depth over {MAX_CALL_DEPTH}", expr.span.line)
        caller_stmt = self.current_stmt
        try:
            try:
                self.exec_body(fn.body, dict(zip(fn.params, args)))
                result = None
            except _ReturnSignal as signal:
                result = signal.value
        finally:
            self.call_depth -= 1
        # restored only on the success path: a propagating error keeps
        # current_stmt at the innermost statement for error_stmt reporting
        self.current_stmt = caller_stmt
        return result

    def _unary(self, expr: Unary, env: dict[str, Value]) -> Value:
        value = self.eval(expr.operand, env)
        if expr.op == "!":
            return not self._truth(value, expr.operand)
        if type(value) is not int:
            raise MiniError("TypeError", f"unary - on non-int at line {expr.span.line}", expr.span.line)
        return -value

    def _binary(self, expr: Binary, env: dict[str, Value]) -> Value:
        op = expr.op
        if op == "&&":
            if not self._truth(self.eval(expr.left, env), expr.left):
                return False
            return self._truth(self.eval(expr.right, env), expr.right)
        if op == "||":
            if self._truth(self.eval(expr.left, env), expr.left):
                return True
            return self._truth(self.eval(expr.right, env), expr.right)
        left = self.eval(expr.left, env)
        right = self.eval(expr.right, env)
        if op == "==":
            return self._equals(left, right)
        if op == "!=":
            return not self._equals(left, right)
        if op in ("+", "-", "*", "/"):
            self._want_int(left, expr)
            self._want_int(right, expr)
            if op == "+":
                return left + right
            if op == "-":
                return left - right
            if op == "*":
                return left * right
            if right == 0:
                raise MiniError("DivByZero", f"division by zero at line {expr.span.line}", expr.span.line)
            return left // right
        if op in ("<", "<=", ">", ">="):
            self._want_int(left, expr)
            self._want_int(right, expr)
            if op == "<":
                return left < right
            if op == "<=":
                return left <= right
            if op == ">":
                return left > right
            return left >= right
        raise MiniError("BadNode", f"unknown operator {op}", expr.span.line)

    @staticmethod
    def _equals(left: Value, right: Value) -> bool:
        if left is None or right is None:
            return left is None and right is None
        if isinstance(left, Record) or isinstance(right, Record):
            return left is right
        if type(left) is not type(right):
            return False
        return left == right

    def _truth(self, value: Value, expr: Expr) -> bool:
        if type(value) is not bool:
            raise MiniError("TypeError", f"expected bool at line {expr.span.line}", expr.span.line)
        return value

    def _want_int(self, value: Value, expr: Binary) -> None:
        if type(value) is not int:
            raise MiniError("TypeError", f"arithmetic on non-int at line {expr.span.line}", expr.span.line)


def run_test(program: Program, test_name: str, hooks: Hooks = NO_HOOKS,
             fuel: int = FUEL_PER_TEST) -> ExecutionTrace:
    """Run one test function to a total outcome."""
    fn = program.function(test_name)
    if fn is None:
        raise ValueError(f"no such test: {test_name}")
    interp = Interpreter(program, hooks, fuel)
    outcome = TestOutcome.PASS
    error_stmt = None
    failure = None
    try:
        if fn.params:
            raise MiniError("ArityMismatch", f"test {test_name} must take no parameters", fn.span.line)
        interp.exec_body(fn.body, {})
    except _ReturnSignal:
        pass
    except MiniError as err:
        outcome = _OUTCOME_BY_TOKEN.get(err.info.token, TestOutcome.RUNTIME_ERROR)
        error_stmt = interp.current_stmt
        failure = err.info
    return ExecutionTrace(
        test_name=test_name,
        covered=frozenset(interp.covered),
        snapshots=tuple(interp.snapshots),
        outcome=outcome,
        error_stmt=error_stmt,
        failure=failure,
    )
