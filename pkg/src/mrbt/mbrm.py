"""Three-state reward machine leaves carrying a fixed action mask."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import AbstractSet


class Status(IntEnum):
    FAILURE = 0
    SUCCESS = 1
    RUNNING = 2


class Kind(Enum):
    CONDITION = "condition"
    NAVIGATION = "navigation"
    INTERACTION = "interaction"


INITIAL_STATE = {
    Kind.CONDITION: Status.FAILURE,
    Kind.NAVIGATION: Status.RUNNING,
    Kind.INTERACTION: Status.RUNNING,
}


@dataclass(frozen=True)
class Mbrm:
    """A masking behaviour reward machine.

    ``rho`` is the label id (a key of the tree's formula set) whose truth drives
    the machine; interaction machines have none.  ``mask`` is a bitset over the
    schema's ordered actions.
    """

    kind: Kind
    rho: str | None
    mask: int
    reward_on_true: float = 1.0
    penalty_on_false: float = -1.0

    def __post_init__(self):
        if self.mask <= 0:
            raise ValueError("action mask must be non-empty")
        if self.kind is Kind.INTERACTION:
            if self.rho is not None:
                raise ValueError("interaction machines are unconditioned")
        elif self.rho is None:
            raise ValueError(f"{self.kind.value} machine needs a formula")

    @property
    def u0(self) -> Status:
        return INITIAL_STATE[self.kind]

    def states(self) -> tuple[Status, ...]:
        """Reachable states for this kind."""
        if self.kind is Kind.CONDITION:
            return (Status.FAILURE, Status.SUCCESS)
        if self.kind is Kind.NAVIGATION:
            return (Status.RUNNING, Status.SUCCESS)
        return (Status.RUNNING,)


def step(mb: Mbrm, u: Status, sigma: AbstractSet[str]) -> tuple[Status, float]:
    if mb.kind is Kind.INTERACTION:
        return Status.RUNNING, 0.0
    holds = mb.rho in sigma
    if holds:
        new = Status.SUCCESS
    else:
        new = Status.FAILURE if mb.kind is Kind.CONDITION else Status.RUNNING
    if new == u:
        return new, 0.0
    if new is Status.SUCCESS:
        return new, mb.reward_on_true
    if u == Status.SUCCESS:
        return new, mb.penalty_on_false
    # e.g. an assignment outside the reachable set for this kind
    return new, 0.0
