"""Stage 3: run repair tools against a reproduced bug and validate the
resulting patches for test-suite adequacy.

Builtin tools:

* ``npe-guard`` — on a null dereference, either wrap the faulty statement in
  a null check (skip guard) or assign a fresh record carrying the accessed
  field with a type-default value right before it.
* ``condition-synth`` — angelic phase (force each candidate condition value
  on the failing tests), snapshot phase (collect labeled bindings across the
  whole suite), synthesis phase (first consistent predicates from the
  template space in canonical order), then validation of every emitted edit.

Every candidate is validated by re-applying its diff to pristine sources and
running the full suite; adequacy means all previously failing tests pass and
no passing test regresses (with the whole suite green, both hold).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Iterable, Mapping, Optional, Sequence

from ..diffs import PatchApplyError, apply_diff, make_diff
from ..minilang.interp import (
    ExecutionTrace,
    Hooks,
    MiniError,
    TestOutcome,
    Value,
    run_test,
)
from ..minilang.nodes import (
    Binary,
    BoolLit,
    Expr,
    Ident,
    If,
    NullLit,
    Program,
    Stmt,
    Unary,
    While,
    expr_source,
)
from ..minilang.parser import MiniSyntaxError, parse_project
from ..minilang.suite import NoTestsError, run_suite
from ..model import ContractViolation, OverfitFlag, PatchCandidate, utc_now
from .localize import CoverageMatrix, ochiai
from .templates import TemplateSpace, eval_predicate

MAX_PATCHES = 50
TOP_K_SUSPICIOUS = 10

NPE_GUARD = "npe-guard"
CONDITION_SYNTH = "condition-synth"
BUILTIN_TOOLS = (NPE_GUARD, CONDITION_SYNTH)


@dataclass(frozen=True)
class LabeledSnapshot:
    """Bindings at the patched statement plus the truth value the patched
    predicate must produce there."""

    test_name: str
    stmt_id: int
    bindings: Mapping[str, Value]
    label: bool


@dataclass(frozen=True)
class SynthPatch:
    """A PatchCandidate with the engine-side context the triage flow needs."""

    candidate: PatchCandidate
    predicate: Optional[Expr] = None
    snapshots: tuple[LabeledSnapshot, ...] = ()
    note: str = ""

    @property
    def adequate(self) -> bool:
        return self.candidate.adequate

    @property
    def diff(self) -> str:
        return self.candidate.edit


def patch_id_for(build_id: str, tool: str, diff: str) -> str:
    digest = hashlib.sha256(diff.encode("utf-8")).hexdigest()[:12]
    return f"{build_id}.{tool}.{digest}"


def is_npe_failure(failure_type: str) -> bool:
    return failure_type == "NullDeref" or failure_type.rsplit(".", 1)[-1] == "NullPointerException"


def select_tools(failure_type: str, registry: "ToolRegistry") -> list[str]:
    """NPE-family failures get the NPE specialist first; generic tools run
    in every attempt; external tools follow in registration order."""
    ordered = []
    if is_npe_failure(failure_type) and registry.has(NPE_GUARD):
        ordered.append(NPE_GUARD)
    if registry.has(CONDITION_SYNTH):
        ordered.append(CONDITION_SYNTH)
    ordered.extend(spec.name for spec in registry.external)
    return ordered


@dataclass(frozen=True)
class ToolRegistry:
    builtin: tuple[str, ...] = BUILTIN_TOOLS
    external: tuple = ()  # ExternalToolSpec entries, run in order

    def has(self, name: str) -> bool:
        return name in self.builtin

    def names(self) -> list[str]:
        return list(self.builtin) + [spec.name for spec in self.external]


# -- validation -----------------------------------------------------------


def validate(program: Program, patch: str) -> bool:
    """True iff the patched program parses and its full suite passes.

    The patch must apply cleanly (PatchApplyError otherwise); a patched
    program that no longer parses or has no tests is inadequate.
    """
    patched = apply_diff(patch, program.file_texts())
    ordered = [(f.path, patched[f.path]) for f in program.files]
    try:
        new_program = parse_project(ordered)
    except MiniSyntaxError:
        return False
    try:
        run = run_suite(new_program)
    except NoTestsError:
        return False
    return all(trace.passed for trace in run.traces.values())


# -- overfitting flags ----------------------------------------------------

_TAUTO_TRUE_OPS = {"==", "<=", ">="}
_TAUTO_FALSE_OPS = {"!=", "<", ">"}


def _syntactic_tautology(pred: Expr) -> bool:
    """v-compared-to-itself, constant booleans, and their negation duals."""
    if isinstance(pred, BoolLit):
        return True
    if isinstance(pred, Unary) and pred.op == "!" and isinstance(pred.operand, BoolLit):
        return True
    if isinstance(pred, Binary) and pred.op in (_TAUTO_TRUE_OPS | _TAUTO_FALSE_OPS):
        left, right = pred.left, pred.right
        if isinstance(left, Ident) and isinstance(right, Ident) and left.name == right.name:
            return True
    return False


def predicate_flags(pred: Optional[Expr], snapshots: Sequence[LabeledSnapshot]) -> set[OverfitFlag]:
    if pred is None:
        return {OverfitFlag.NONE}
    flags: set[OverfitFlag] = set()
    if _syntactic_tautology(pred):
        flags.add(OverfitFlag.SYNTACTIC_TAUTOLOGY)
    values = []
    for snap in snapshots:
        try:
            values.append(eval_predicate(pred, snap.bindings))
        except MiniError:
            values = []
            break
    if values and len(set(values)) == 1:
        flags.add(OverfitFlag.CONSTANT_PREDICATE)
    return flags or {OverfitFlag.NONE}


def flag_overfitting(patch: SynthPatch, labeled_snapshots: Sequence[LabeledSnapshot]) -> set[OverfitFlag]:
    """Flags for a patch: constant-over-all-snapshots and syntactic
    tautologies; patches without a synthesized predicate get {none}."""
    return predicate_flags(patch.predicate, labeled_snapshots)


# -- edit construction ----------------------------------------------------


def _file_and_text(program: Program, stmt: Stmt) -> tuple[str, str]:
    fn = program.function_of(stmt.stmt_id)
    return fn.file_path, program.file_text(fn.file_path)


def replace_condition_diff(program: Program, stmt: If, pred: Expr) -> str:
    path, text = _file_and_text(program, stmt)
    span = stmt.cond.span
    new_text = text[:span.start] + expr_source(pred) + text[span.end:]
    return make_diff(path, text, new_text)


def wrap_precondition_diff(program: Program, stmt: Stmt, pred: Expr) -> str:
    path, text = _file_and_text(program, stmt)
    span = stmt.span
    original = text[span.start:span.end]
    wrapped = f"if ({expr_source(pred)}) {{ {original} }}"
    new_text = text[:span.start] + wrapped + text[span.end:]
    return make_diff(path, text, new_text)


def insert_before_diff(program: Program, stmt: Stmt, inserted_src: str) -> str:
    path, text = _file_and_text(program, stmt)
    span = stmt.span
    new_text = text[:span.start] + f"{inserted_src} " + text[span.start:]
    return make_diff(path, text, new_text)


# -- npe-guard ------------------------------------------------------------

_DEFAULT_FIELD_VALUES = ("0", "false", "{}")  # int, bool, record defaults


def npe_guard_repair(
    program: Program,
    traces: Mapping[str, ExecutionTrace],
    matrix: CoverageMatrix,
    *,
    build_id: str = "",
    max_patches: int = MAX_PATCHES,
    now: Optional[datetime] = None,
    diagnostics: Optional[list[str]] = None,
) -> list[SynthPatch]:
    """Guard or default-initialize the dereferenced variable at the faulty
    statement; every candidate is validated before emission."""
    null_traces = [
        t for t in traces.values()
        if t.outcome is TestOutcome.NULL_DEREF and t.error_stmt is not None
    ]
    if not null_traces:
        raise ContractViolation("npe-guard needs a null_deref trace")
    now = now or utc_now()
    patches: list[SynthPatch] = []
    seen_sites = set()
    emitted_per_strategy = {"skip-guard": 0, "default-value": 0}
    for trace in null_traces:
        info = trace.failure
        site = (trace.error_stmt, info.var, info.field)
        if site in seen_sites:
            continue
        seen_sites.add(site)
        if info.var is None:
            if diagnostics is not None:
                diagnostics.append(
                    f"{NPE_GUARD}: cannot identify dereferenced variable "
                    f"for {trace.test_name} at stmt {trace.error_stmt}")
            continue
        stmt = program.stmt(trace.error_stmt)
        guard = Binary("!=", Ident(info.var), NullLit())
        edits = []
        if emitted_per_strategy["skip-guard"] < max_patches:
            edits.append(("skip-guard", wrap_precondition_diff(program, stmt, guard)))
        if info.field is not None:
            for default in _DEFAULT_FIELD_VALUES:
                if emitted_per_strategy["default-value"] + 1 > max_patches:
                    break
                src = f"{info.var} = {{{info.field}: {default}}};"
                edits.append(("default-value", insert_before_diff(program, stmt, src)))
        for strategy, diff in edits:
            try:
                adequate = validate(program, diff)
            except PatchApplyError as exc:
                if diagnostics is not None:
                    diagnostics.append(f"{NPE_GUARD}: {exc}")
                continue
            emitted_per_strategy[strategy] += 1
            candidate = PatchCandidate(
                patch_id=patch_id_for(build_id, NPE_GUARD, diff),
                build_id=build_id,
                tool_name=NPE_GUARD,
                edit=diff,
                adequate=adequate,
                overfitting_flags=frozenset({OverfitFlag.NONE}),
                created_at=now,
            )
            patches.append(SynthPatch(candidate, note=strategy))
    return patches


# -- condition synthesis --------------------------------------------------


def _forcings_for(stmt: Stmt) -> list[object]:
    if isinstance(stmt, If):
        return [True, False]
    if isinstance(stmt, While):
        return []
    return ["skip"]


def _hooks_for(stmt_id: int, forcing: object, snapshot: bool) -> Hooks:
    snapshot_at = frozenset({stmt_id}) if snapshot else frozenset()
    if forcing == "skip":
        return Hooks(snapshot_at=snapshot_at, skip_stmts=frozenset({stmt_id}))
    if forcing is None:
        return Hooks(snapshot_at=snapshot_at)
    return Hooks(snapshot_at=snapshot_at, force_condition={stmt_id: bool(forcing)})


def condition_synth_repair(
    program: Program,
    traces: Mapping[str, ExecutionTrace],
    matrix: CoverageMatrix,
    *,
    build_id: str = "",
    top_k: int = TOP_K_SUSPICIOUS,
    max_patches: int = MAX_PATCHES,
    now: Optional[datetime] = None,
    diagnostics: Optional[list[str]] = None,
) -> list[SynthPatch]:
    """Angelic forcing, labeled snapshots, then first-consistent template
    enumeration at the top-k suspicious statements."""
    failing = [name for name, t in traces.items() if not t.passed]
    passing = [name for name, t in traces.items() if t.passed]
    if not failing or not passing:
        raise ContractViolation("condition synthesis needs >= 1 failing and >= 1 passing test")
    now = now or utc_now()
    ranking = [(stmt_id, score) for stmt_id, score in ochiai(matrix) if score > 0]
    patches: list[SynthPatch] = []
    seen_diffs: set[str] = set()
    adequate_count = 0
    for stmt_id, _score in ranking[:top_k]:
        stmt = program.stmt(stmt_id)
        for forcing in _forcings_for(stmt):
            if adequate_count >= max_patches:
                return patches
            forced_runs = {
                name: run_test(program, name, _hooks_for(stmt_id, forcing, snapshot=False))
                for name in failing
            }
            if not all(t.passed for t in forced_runs.values()):
                continue  # this forcing is not angelic
            snapshots = _collect_snapshots(program, traces, stmt, stmt_id, forcing)
            if not snapshots:
                if diagnostics is not None:
                    diagnostics.append(
                        f"{CONDITION_SYNTH}: empty snapshot set at stmt {stmt_id}")
                continue
            space = TemplateSpace.for_snapshots([s.bindings for s in snapshots])
            for pred in space.predicates():
                if adequate_count >= max_patches:
                    return patches
                if not _consistent(pred, snapshots):
                    continue
                if isinstance(stmt, If):
                    diff = replace_condition_diff(program, stmt, pred)
                else:
                    diff = wrap_precondition_diff(program, stmt, pred)
                if diff in seen_diffs:
                    continue
                seen_diffs.add(diff)
                try:
                    adequate = validate(program, diff)
                except PatchApplyError as exc:
                    if diagnostics is not None:
                        diagnostics.append(f"{CONDITION_SYNTH}: {exc}")
                    continue
                flags = predicate_flags(pred, snapshots)
                candidate = PatchCandidate(
                    patch_id=patch_id_for(build_id, CONDITION_SYNTH, diff),
                    build_id=build_id,
                    tool_name=CONDITION_SYNTH,
                    edit=diff,
                    adequate=adequate,
                    overfitting_flags=frozenset(flags),
                    created_at=now,
                )
                patches.append(SynthPatch(
                    candidate,
                    predicate=pred,
                    snapshots=tuple(snapshots),
                    note="condition-replacement" if isinstance(stmt, If) else "precondition",
                ))
                if adequate:
                    adequate_count += 1
    return patches


def _collect_snapshots(
    program: Program,
    traces: Mapping[str, ExecutionTrace],
    stmt: Stmt,
    stmt_id: int,
    forcing: object,
) -> list[LabeledSnapshot]:
    """Bindings at the statement across all tests, labeled with the truth
    value each execution requires: failing tests take the angelic forcing,
    passing tests keep their observed behavior."""
    labeled: list[LabeledSnapshot] = []
    for name, original in traces.items():
        run_forcing = forcing if not original.passed else None
        trace = run_test(program, name, _hooks_for(stmt_id, run_forcing, snapshot=True))
        for snap in trace.snapshots:
            if snap.stmt_id != stmt_id:
                continue
            if not original.passed:
                label = False if forcing == "skip" else bool(forcing)
            elif isinstance(stmt, If):
                if snap.cond_value is None:
                    continue  # unexpected: passing run was not forced
                label = snap.cond_value
            else:
                label = True  # statement executed on the passing run
            labeled.append(LabeledSnapshot(name, stmt_id, snap.bindings, label))
    return labeled


def _consistent(pred: Expr, snapshots: Sequence[LabeledSnapshot]) -> bool:
    for snap in snapshots:
        try:
            if eval_predicate(pred, snap.bindings) != snap.label:
                return False
        except MiniError:
            return False
    return True


# -- attempt orchestration ------------------------------------------------


@dataclass(frozen=True)
class RepairInput:
    """What a repair tool needs to start working on a reproduced bug."""

    source_files: tuple[str, ...]
    suspicious: tuple[tuple[int, float], ...]  # (stmt_id, score), ranked
    failing_test_names: tuple[str, ...]
    failure_type: str
    dependency_locators: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.failing_test_names:
            raise ValueError("failing_test_names must be non-empty")


@dataclass
class RepairOutcome:
    input: Optional[RepairInput]
    patches: list[SynthPatch]
    tools_run: list[str]
    diagnostics: list[str] = field(default_factory=list)

    def adequate_patches(self) -> list[SynthPatch]:
        return [p for p in self.patches if p.adequate]


def gather_repair_input(program: Program, traces: Mapping[str, ExecutionTrace],
                        matrix: CoverageMatrix,
                        dependency_locators: Sequence[str] = ()) -> RepairInput:
    failing = [name for name, t in traces.items() if not t.passed]
    first_failure = traces[failing[0]].failure
    failure_type = first_failure.token if first_failure else "Unknown"
    ranked = [(s, score) for s, score in ochiai(matrix) if score > 0]
    return RepairInput(
        source_files=tuple(f.path for f in program.files),
        suspicious=tuple(ranked[:TOP_K_SUSPICIOUS]),
        failing_test_names=tuple(failing),
        failure_type=failure_type,
        dependency_locators=tuple(dependency_locators),
    )


def analyst_order(patches: Iterable[SynthPatch]) -> list[SynthPatch]:
    """Fewer overfitting flags first, then shorter diff, then emission order."""
    indexed = sorted(
        enumerate(patches),
        key=lambda pair: (pair[1].candidate.flag_count(), len(pair[1].diff), pair[0]),
    )
    return [patch for _, patch in indexed]


def repair_program(
    program: Program,
    *,
    build_id: str,
    registry: ToolRegistry = ToolRegistry(),
    workspace=None,
    max_patches: int = MAX_PATCHES,
    now: Optional[datetime] = None,
) -> RepairOutcome:
    """Run the selected tools in order against one reproduced program."""
    from .external import run_external_tool  # cycle: external validates via engine

    traces = {name: run_test(program, name) for name in program.test_names()}
    failing = [name for name, t in traces.items() if not t.passed]
    diagnostics: list[str] = []
    if not failing:
        return RepairOutcome(None, [], [], ["no failing test to repair"])
    matrix = CoverageMatrix.from_traces(traces.values(), program.stmt_count)
    deps = (str(workspace.dependency_cache_dir),) if workspace is not None else ()
    repair_input = gather_repair_input(program, traces, matrix, deps)
    tools = select_tools(repair_input.failure_type, registry)
    patches: list[SynthPatch] = []
    seen = set()
    for tool in tools:
        try:
            if tool == NPE_GUARD:
                produced = npe_guard_repair(
                    program, traces, matrix, build_id=build_id,
                    max_patches=max_patches, now=now, diagnostics=diagnostics)
            elif tool == CONDITION_SYNTH:
                produced = condition_synth_repair(
                    program, traces, matrix, build_id=build_id,
                    max_patches=max_patches, now=now, diagnostics=diagnostics)
            else:
                spec = next(s for s in registry.external if s.name == tool)
                produced = run_external_tool(
                    spec, repair_input, program, workspace,
                    build_id=build_id, now=now, diagnostics=diagnostics)
        except ContractViolation as exc:
            diagnostics.append(f"{tool}: skipped ({exc})")
            continue
        for patch in produced:
            if patch.diff not in seen:
                seen.add(patch.diff)
                patches.append(patch)
    return RepairOutcome(repair_input, analyst_order(patches), tools, diagnostics)
