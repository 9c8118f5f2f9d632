"""Construction of the sequential-subtask MRBT and its labelling function."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence as Seq

from .bt import Fallback, Leaf, Mrbt, Sequence, iter_nodes
from .formula import EnvSchema, Formula
from .mbrm import Kind, Mbrm


@dataclass(frozen=True)
class RewardConfig:
    reward_on_true: float = 1.0
    penalty_on_false: float = -1.0
    nav_reward: float = 0.1
    nav_penalty: float = -0.1
    # binary goal reward added by the trainer on task completion
    task_bonus: float = 10.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.reward_on_true, self.penalty_on_false, self.nav_reward, self.nav_penalty)


@dataclass(frozen=True)
class SubtaskSpec:
    name: str
    psi: Formula
    phi: Formula
    mask_nav: int
    mask_interact: int

    def __post_init__(self):
        if self.mask_nav <= 0 or self.mask_interact <= 0:
            raise ValueError(f"subtask {self.name!r}: masks must be non-empty")


@dataclass(frozen=True)
class StructureMetrics:
    behaviors: int
    rm_states: int
    rm_edges: int


def psi_id(i: int) -> str:
    return f"psi{i}"


def phi_id(i: int) -> str:
    return f"phi{i}"


def leaf_ids(i: int) -> tuple[str, str, str]:
    return (f"cond{i}", f"nav{i}", f"act{i}")


def build_template(subtasks: Seq[SubtaskSpec], schema: EnvSchema, rewards: RewardConfig | None = None) -> Mrbt:
    """Root Sequence over one Fallback(condition, Sequence(navigate, interact)) per subtask."""
    if not subtasks:
        raise ValueError("template needs at least one subtask")
    rewards = rewards or RewardConfig()
    formulas: dict[str, Formula] = {}
    children = []
    for i, st in enumerate(subtasks, start=1):
        if st.mask_nav & ~schema.full_mask or st.mask_interact & ~schema.full_mask:
            raise ValueError(f"subtask {st.name!r}: mask does not match the schema's action set")
        formulas[psi_id(i)] = st.psi
        formulas[phi_id(i)] = st.phi
        cid, nid, aid = leaf_ids(i)
        cond = Leaf(cid, Mbrm(Kind.CONDITION, psi_id(i), schema.full_mask,
                              rewards.reward_on_true, rewards.penalty_on_false))
        nav = Leaf(nid, Mbrm(Kind.NAVIGATION, phi_id(i), st.mask_nav, rewards.nav_reward, rewards.nav_penalty))
        act = Leaf(aid, Mbrm(Kind.INTERACTION, None, st.mask_interact, 0.0, 0.0))
        children.append(Fallback([cond, Sequence([nav, act])]))
    return Mrbt(Sequence(children), formulas, schema)


def label(subtasks: Seq[SubtaskSpec], preds: Mapping, bindings: Mapping) -> frozenset[str]:
    """Ids of the completion and proximity formulas that hold on ``preds``."""
    out = []
    for i, st in enumerate(subtasks, start=1):
        if st.psi.compiled(preds, bindings):
            out.append(psi_id(i))
        if st.phi.compiled(preds, bindings):
            out.append(phi_id(i))
    return frozenset(out)


def label_bits(subtasks: Seq[SubtaskSpec], preds: Mapping, bindings: Mapping) -> tuple[int, int]:
    """Completion and proximity truth as two bitsets (bit i-1 for subtask i)."""
    psi = phi = 0
    for i, st in enumerate(subtasks):
        if st.psi.compiled(preds, bindings):
            psi |= 1 << i
        if st.phi.compiled(preds, bindings):
            phi |= 1 << i
    return psi, phi


def structure_metrics(k: int) -> StructureMetrics:
    # Counted as two states and four labelled edges per machine, three machines
    # per subtask; this reproduces 18 states / 36 edges at k=3.
    if k < 1:
        raise ValueError("k must be positive")
    return StructureMetrics(behaviors=1 + 5 * k, rm_states=6 * k, rm_edges=12 * k)


def count_nodes(tree: Mrbt) -> int:
    return sum(1 for _ in iter_nodes(tree.root))


# Reference sizes of the hierarchical reward machine with the same reward
# logic for three subtasks.
HRM_REFERENCE_K3 = {"states": 13, "edges": 24}
