"""Minimum cross-entropy entailment for statistical and subjective knowledge bases."""

from .algebra import AtomSpace, Signature, build_atom_space, extension
from .crossentropy import NoModel, ce_project, ce_project_oracle, conditional_mix, cross_entropy, jeffrey
from .inference import (
    ConsistencyReport, InferenceConfig, NonUnique, QueryResult, answer, case_split, check_kb,
    decompose_blocks,
)
from .statistics import Infeasible, Interval, compile_statistical, stat_entail_interval
from .syntax import KBSyntaxError, KnowledgeBase, Query, parse_formula, parse_kb, parse_query

__version__ = "0.1.0"

__all__ = [
    "AtomSpace", "ConsistencyReport", "Infeasible", "InferenceConfig", "Interval", "KBSyntaxError",
    "KnowledgeBase", "NoModel", "NonUnique", "Query", "QueryResult", "Signature", "answer",
    "build_atom_space", "case_split", "ce_project", "ce_project_oracle", "check_kb",
    "compile_statistical", "conditional_mix", "cross_entropy", "decompose_blocks", "extension",
    "jeffrey", "parse_formula", "parse_kb", "parse_query", "stat_entail_interval",
]
