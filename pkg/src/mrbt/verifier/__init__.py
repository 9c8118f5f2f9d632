"""Bounded verification of subtask formulas and demonstration-based testing."""

from .checks import (
    check_completion_correctness,
    check_composition_persistence,
    check_non_triviality,
    check_object_proximity_correctness,
    persistence_by_subtask,
    replay_violation,
    verify_all,
)
from .model import Result, Spec, SymbolicModel, Trace, VerifyConfig, VerifyVerdict

__all__ = [
    "Result", "Spec", "SymbolicModel", "Trace", "VerifyConfig", "VerifyVerdict",
    "check_completion_correctness", "check_composition_persistence", "check_non_triviality",
    "check_object_proximity_correctness", "persistence_by_subtask", "replay_violation", "verify_all",
]
