"""Types shared by the bounded checks."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

from ..formula import EnvSchema
from ..gridworld.env import ACTIONS, DETERMINISTIC, DynamicsConfig, EnvState, apply_action


class Spec(enum.Enum):
    COMPLETION_CORRECTNESS = "CompletionCorrectness"
    COMPLETION_NON_TRIVIALITY = "CompletionNonTriviality"
    PROXIMITY_CORRECTNESS = "ObjectProximityCorrectness"
    PROXIMITY_NON_TRIVIALITY = "ObjectProximityNonTriviality"
    COMPOSITION_PERSISTENCE = "CompositionPersistence"


class Result(enum.Enum):
    HOLDS = "Holds"
    COUNTEREXAMPLE = "CounterexampleFound"
    WITNESSES = "WitnessesFound"
    INCONCLUSIVE = "Inconclusive"

    @property
    def passed(self) -> bool:
        return self in (Result.HOLDS, Result.WITNESSES)


@dataclass
class SymbolicModel:
    """Transition model the checks explore.

    ``successor`` is the deterministic next-state function; the relation view
    is derived from it.  ``exact`` records whether it matches the concrete
    environment (false when the real dynamics are stochastic).
    """

    schema: EnvSchema
    init_constraint: Callable[[EnvState, object], bool]
    successor: Callable[[EnvState, int], EnvState] = apply_action
    exact: bool = True
    n_actions: int = len(ACTIONS)
    cache: dict = field(default_factory=dict, repr=False)

    def transition_relation(self, s: EnvState, a: int, s2: EnvState) -> bool:
        return self.successor(s, a) == s2

    @classmethod
    def from_space(cls, space, dynamics: DynamicsConfig = DETERMINISTIC) -> "SymbolicModel":
        return cls(space.schema, space.init_constraint, apply_action, exact=not dynamics.stochastic)


@dataclass(frozen=True)
class VerifyConfig:
    horizon: int = 25
    n_distinct: int = 3
    timeout_secs: float = 900.0
    scale: str | int | None = "mini"
    # per-task exploration budget; exceeding it makes "Holds" unattainable
    max_states: int = 2_000_000
    # initial states drawn per task when the space is too large to enumerate
    samples: int = 64
    seed: int = 0
    # explored graphs kept for reuse across checks, counted in states
    cache_states: int = 1_000_000

    def __post_init__(self):
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")
        if self.n_distinct < 1:
            raise ValueError("n_distinct must be positive")
        if self.timeout_secs <= 0:
            raise ValueError("timeout_secs must be positive")


@dataclass
class Trace:
    task: object
    states: list
    actions: list  # len(states) - 1 action ids
    labels: list = field(default_factory=list)  # per step: frozenset of formula ids that hold
    note: str = ""
    flip_step: int | None = None

    def __len__(self):
        return len(self.states)


@dataclass
class VerifyVerdict:
    spec: Spec
    subtask_index: int | None
    result: Result
    trace: Trace | None = None
    wall_time_secs: float = 0.0
    witnesses: list = field(default_factory=list)
    message: str = ""
    formula: str = ""
    violations: int = 0
    formulas: tuple = field(default=(), repr=False)

    @property
    def passed(self) -> bool:
        return self.result.passed

    @property
    def key(self) -> tuple:
        return (list(Spec).index(self.spec), self.subtask_index or 0)
