"""Repair tools, fault localization, and patch validation."""

from .engine import (
    BUILTIN_TOOLS,
    CONDITION_SYNTH,
    MAX_PATCHES,
    NPE_GUARD,
    TOP_K_SUSPICIOUS,
    LabeledSnapshot,
    RepairInput,
    RepairOutcome,
    SynthPatch,
    ToolRegistry,
    analyst_order,
    condition_synth_repair,
    flag_overfitting,
    gather_repair_input,
    npe_guard_repair,
    predicate_flags,
    repair_program,
    select_tools,
    validate,
)
from .external import ExternalToolSpec, run_external_tool
from .localize import CoverageMatrix, ochiai
from .templates import TemplateSpace, eval_predicate

__all__ = [
    "BUILTIN_TOOLS", "CONDITION_SYNTH", "CoverageMatrix", "ExternalToolSpec", "LabeledSnapshot",
    "MAX_PATCHES", "NPE_GUARD", "RepairInput", "RepairOutcome", "SynthPatch",
    "TOP_K_SUSPICIOUS", "TemplateSpace", "ToolRegistry", "analyst_order",
    "condition_synth_repair", "eval_predicate", "flag_overfitting",
    "gather_repair_input", "npe_guard_repair", "ochiai", "predicate_flags",
    "repair_program", "run_external_tool", "select_tools", "validate",
]
