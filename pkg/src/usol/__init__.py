"""Unique solutions of equations in CCS: parsing, LTS exploration,
equivalence checking, divergence analysis and certification."""

from .certify import Certificate, Config, certify_preorder, certify_unique_solution, replay
from .desugar import desugar_values
from .divergence import (
    CriterionReport, DivergenceReport, Lasso, analyze_divergences, find_divergence_witness,
    syntactic_criterion,
)
from .equations import (
    EquationSystem, GuardReport, SyntacticSolution, check_guardedness, syntactic_solution, unfold,
)
from .equiv import EquivResult, check_solution, trace_relation, weak_bisim, weak_sim
from .lts import AnnotatedLts, Env, WeakLts, canonicalize, explore, saturate, step
from .parser import CCSError, Program, parse_process, parse_program, parse_term
from .terms import Action, substitute

__version__ = "0.1.0"

__all__ = [
    "Action", "AnnotatedLts", "CCSError", "Certificate", "Config", "CriterionReport",
    "DivergenceReport", "Env", "EquationSystem", "EquivResult", "GuardReport", "Lasso",
    "Program", "SyntacticSolution", "WeakLts", "analyze_divergences", "canonicalize",
    "certify_preorder", "certify_unique_solution", "check_guardedness", "check_solution",
    "desugar_values", "explore", "find_divergence_witness", "parse_process", "parse_program",
    "parse_term", "replay", "saturate", "step", "substitute", "syntactic_criterion",
    "syntactic_solution", "trace_relation", "unfold", "weak_bisim", "weak_sim",
]
