"""Behaviour tree engine over MBRM leaves.

Control nodes are memoryless: every tick restarts at the root.  Only the
leaves reached by a tick are stepped; the rest keep their state.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import AbstractSet, Iterable, Mapping, TextIO

from . import mbrm
from .formula import EnvSchema, Formula
from .mbrm import Mbrm, Status


class Sequence:
    def __init__(self, children):
        if not children:
            raise ValueError("Sequence needs at least one child")
        self.children = list(children)

    def __repr__(self):
        return f"Sequence({self.children!r})"


class Fallback:
    def __init__(self, children):
        if not children:
            raise ValueError("Fallback needs at least one child")
        self.children = list(children)

    def __repr__(self):
        return f"Fallback({self.children!r})"


@dataclass(frozen=True)
class Leaf:
    id: str
    machine: Mbrm


def iter_nodes(node):
    """Depth-first pre-order over all nodes."""
    yield node
    for c in getattr(node, "children", ()):
        yield from iter_nodes(c)


@dataclass(frozen=True)
class TickResult:
    ticked: tuple[str, ...]
    reward: float
    mask: int
    root_status: Status


class Mrbt:
    """A behaviour tree whose leaves are MBRMs, plus the leaf state assignment."""

    def __init__(self, root, formulas: Mapping[str, Formula], schema: EnvSchema):
        self.root = root
        self.formulas = dict(formulas)
        self.schema = schema
        self.leaves: list[Leaf] = [n for n in iter_nodes(root) if isinstance(n, Leaf)]
        if not self.leaves:
            raise ValueError("tree has no leaves")
        ids = [lf.id for lf in self.leaves]
        if len(set(ids)) != len(ids):
            raise ValueError("leaf ids must be unique")
        for lf in self.leaves:
            if lf.machine.rho is not None and lf.machine.rho not in self.formulas:
                raise ValueError(f"leaf {lf.id} refers to unknown formula {lf.machine.rho!r}")
            if lf.machine.mask & ~schema.full_mask:
                raise ValueError(f"leaf {lf.id} mask has bits outside the action set")
        self._by_id = {lf.id: lf for lf in self.leaves}
        self.assignment: dict[str, Status] = {}
        self.reset()

    def __len__(self):
        return sum(1 for _ in iter_nodes(self.root))

    def leaf(self, leaf_id: str) -> Leaf:
        return self._by_id[leaf_id]

    def reset(self) -> None:
        self.assignment = {lf.id: lf.machine.u0 for lf in self.leaves}

    def snapshot(self) -> tuple[int, ...]:
        return tuple(int(self.assignment[lf.id]) for lf in self.leaves)

    def restore(self, snap: Iterable[int]) -> None:
        for lf, v in zip(self.leaves, snap):
            self.assignment[lf.id] = Status(v)

    def tick(self, sigma: AbstractSet[str]) -> TickResult:
        unknown = set(sigma) - self.formulas.keys()
        if unknown:
            raise ValueError(f"label assignment has unknown formula ids {sorted(unknown)}")
        ticked: list[str] = []
        reward = 0.0
        pending: dict[str, Status] = {}

        def run(node) -> Status:
            nonlocal reward
            if isinstance(node, Leaf):
                new, r = mbrm.step(node.machine, self.assignment[node.id], sigma)
                ticked.append(node.id)
                pending[node.id] = new
                reward += r
                return new
            if isinstance(node, Sequence):
                for c in node.children:
                    st = run(c)
                    if st != Status.SUCCESS:
                        return st
                return Status.SUCCESS
            if isinstance(node, Fallback):
                for c in node.children:
                    st = run(c)
                    if st != Status.FAILURE:
                        return st
                return Status.FAILURE
            raise TypeError(f"unknown node {node!r}")

        root_status = run(self.root)
        # all rewards are computed from u_t, then the assignment moves to u_{t+1}
        self.assignment.update(pending)
        mask = self._by_id[ticked[-1]].machine.mask
        return TickResult(tuple(ticked), reward, mask, root_status)


@dataclass
class TickTraceWriter:
    """Writes one CSV row per tick: ``t, ticked ids, reward, mask bits, root status``."""

    stream: TextIO
    n_actions: int
    t: int = 0
    _writer: object = field(init=False, default=None)

    def __post_init__(self):
        self._writer = csv.writer(self.stream)
        self._writer.writerow(["t", "ticked", "reward", "mask", "root_status"])

    def write(self, res: TickResult) -> None:
        bits = format(res.mask, f"0{self.n_actions}b")[::-1]
        self._writer.writerow([self.t, " ".join(res.ticked), f"{res.reward:g}", bits, res.root_status.name])
        self.t += 1
