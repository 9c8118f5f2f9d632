"""MiniGrid-style dynamics on a compact, hashable state."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..formula import (
    ABSENT,
    CLOSED,
    COORD2,
    COLORS,
    LOCKED,
    NOWHERE,
    OPEN,
    SCALAR,
    EnvSchema,
    PredicateDecl,
)

ACTIONS = ("left", "right", "forward", "pickup", "drop", "toggle", "done")
LEFT, RIGHT, FORWARD, PICKUP, DROP, TOGGLE, DONE = range(7)
N_COLORS = len(COLORS)

# 0: +x (east), 1: +y (south), 2: -x (west), 3: -y (north)
DIR_VEC = ((1, 0), (0, 1), (-1, 0), (0, -1))

# MiniGrid object ids for the (object, colour, state) grid encoding
OBJ_EMPTY, OBJ_WALL, OBJ_DOOR, OBJ_KEY, OBJ_BOX, OBJ_GOAL, OBJ_AGENT = 1, 2, 4, 5, 7, 8, 10


def make_schema(grid_size: int) -> EnvSchema:
    preds = (
        PredicateDecl("agent_pos", COORD2),
        PredicateDecl("agent_dir", SCALAR),
        PredicateDecl("front_pos", COORD2),
        PredicateDecl("goal_pos", COORD2),
        PredicateDecl("key_pos", COORD2, colored=True),
        PredicateDecl("door_pos", COORD2, colored=True),
        PredicateDecl("door_state", SCALAR, colored=True),
        PredicateDecl("box_pos", COORD2, colored=True),
        PredicateDecl("box_state", SCALAR, colored=True),
    )
    return EnvSchema(preds, ACTIONS, grid_size)


@dataclass(frozen=True, eq=False)
class Layout:
    """Static part of a grid: walls, goal and fixed door/box positions per colour."""

    size: int
    walls: frozenset
    goal: tuple | None
    door_pos: tuple  # per colour: (x, y) or None
    box_pos: tuple

    def __post_init__(self):
        door_at = {p: c for c, p in enumerate(self.door_pos) if p is not None}
        box_at = {p: c for c, p in enumerate(self.box_pos) if p is not None}
        object.__setattr__(self, "door_at", door_at)
        object.__setattr__(self, "box_at", box_at)
        key = (self.size, self.walls, self.goal, self.door_pos, self.box_pos)
        object.__setattr__(self, "_key", key)
        object.__setattr__(self, "_hash", hash(key))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        return isinstance(other, Layout) and self._hash == other._hash and self._key == other._key

    def in_bounds(self, p) -> bool:
        return 0 <= p[0] < self.size and 0 <= p[1] < self.size


class EnvState(NamedTuple):
    layout: Layout
    agent_pos: tuple
    agent_dir: int
    carried: int  # colour of the carried key, -1 if none
    keys: tuple  # per colour: (x, y) on the grid, or None (carried, in a box, or absent)
    doors: tuple  # per colour: OPEN/CLOSED/LOCKED, -1 if absent
    boxes: tuple  # per colour: OPEN/CLOSED, -1 if absent
    box_contents: tuple  # per box colour: colour of the key inside, -1 if empty

    @property
    def front(self) -> tuple:
        dx, dy = DIR_VEC[self.agent_dir]
        return (self.agent_pos[0] + dx, self.agent_pos[1] + dy)

    def predicates(self) -> dict:
        return predicates(self)


@dataclass(frozen=True)
class DynamicsConfig:
    stochastic: bool = False
    flip_prob: float | None = None
    rng_seed: int = 0

    def __post_init__(self):
        p = self.flip_prob
        if p is None:
            p = 0.05 if self.stochastic else 0.0
        if not 0.0 <= p <= 1.0:
            raise ValueError("flip_prob must lie in [0, 1]")
        if not self.stochastic and p != 0.0:
            raise ValueError("deterministic dynamics require flip_prob = 0")
        object.__setattr__(self, "flip_prob", float(p))

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)


DETERMINISTIC = DynamicsConfig()


def _key_at(keys, pos) -> int:
    for c, p in enumerate(keys):
        if p == pos:
            return c
    return -1


def is_empty(s: EnvState, pos) -> bool:
    """True when ``pos`` holds nothing at all (a key can be dropped there)."""
    lay = s.layout
    if not lay.in_bounds(pos) or pos in lay.walls or pos == lay.goal:
        return False
    if pos in lay.door_at or pos in lay.box_at:
        return False
    return _key_at(s.keys, pos) < 0 and pos != s.agent_pos


def can_enter(s: EnvState, pos) -> bool:
    lay = s.layout
    if not lay.in_bounds(pos) or pos in lay.walls:
        return False
    d = lay.door_at.get(pos)
    if d is not None and s.doors[d] != OPEN:
        return False
    if pos in lay.box_at:
        return False
    return _key_at(s.keys, pos) < 0


def _set(tup, i, v):
    lst = list(tup)
    lst[i] = v
    return tuple(lst)


def apply_action(s: EnvState, a: int) -> EnvState:
    """Deterministic transition.  Invalid or blocked actions leave the state unchanged."""
    if a == LEFT:
        return s._replace(agent_dir=(s.agent_dir - 1) % 4)
    if a == RIGHT:
        return s._replace(agent_dir=(s.agent_dir + 1) % 4)
    if a == FORWARD:
        f = s.front
        return s._replace(agent_pos=f) if can_enter(s, f) else s
    if a == PICKUP:
        if s.carried >= 0:
            return s
        f = s.front
        k = _key_at(s.keys, f)
        if k >= 0:
            return s._replace(carried=k, keys=_set(s.keys, k, None))
        b = s.layout.box_at.get(f)
        if b is not None and s.boxes[b] == OPEN and s.box_contents[b] >= 0:
            return s._replace(carried=s.box_contents[b], box_contents=_set(s.box_contents, b, -1))
        return s
    if a == DROP:
        if s.carried < 0:
            return s
        f = s.front
        if not is_empty(s, f):
            return s
        return s._replace(carried=-1, keys=_set(s.keys, s.carried, f))
    if a == TOGGLE:
        f = s.front
        lay = s.layout
        d = lay.door_at.get(f)
        if d is not None:
            st = s.doors[d]
            if st == LOCKED:
                if s.carried == d:
                    return s._replace(doors=_set(s.doors, d, OPEN))
                return s
            return s._replace(doors=_set(s.doors, d, CLOSED if st == OPEN else OPEN))
        b = lay.box_at.get(f)
        if b is not None and s.boxes[b] == CLOSED:
            return s._replace(boxes=_set(s.boxes, b, OPEN))
        return s
    # done, or an out-of-range action id
    return s


def drop_targets(s: EnvState) -> list:
    ax, ay = s.agent_pos
    out = []
    for dx, dy in DIR_VEC:
        p = (ax + dx, ay + dy)
        if is_empty(s, p):
            out.append(p)
    return out


def step_env(s: EnvState, a: int, dyn: DynamicsConfig = DETERMINISTIC, rng: np.random.Generator | None = None):
    """One environment transition.

    Under stochastic dynamics a carried key falls, with probability
    ``dyn.flip_prob``, onto a uniformly chosen free orthogonal neighbour of the
    agent; with no free neighbour nothing happens.
    """
    s2 = apply_action(s, a)
    if dyn.stochastic and s2.carried >= 0 and dyn.flip_prob > 0.0:
        if rng is None:
            raise ValueError("stochastic dynamics need an rng")
        if rng.random() < dyn.flip_prob:
            targets = drop_targets(s2)
            if targets:
                p = targets[int(rng.integers(len(targets)))]
                s2 = s2._replace(carried=-1, keys=_set(s2.keys, s2.carried, p))
    return s2


def successors(s: EnvState) -> list:
    return [apply_action(s, a) for a in range(len(ACTIONS))]


def predicates(s: EnvState) -> dict:
    """Predicate view of a state.  Missing, carried or occluded objects read -1."""
    lay = s.layout
    ap = s.agent_pos
    key_pos = [NOWHERE] * N_COLORS
    for c, p in enumerate(s.keys):
        if p is not None:
            key_pos[c] = p
    for b, k in enumerate(s.box_contents):
        if k >= 0 and s.boxes[b] == OPEN:
            key_pos[k] = lay.box_pos[b]
    door_pos = [NOWHERE] * N_COLORS
    door_state = [ABSENT] * N_COLORS
    for c, p in enumerate(lay.door_pos):
        if p is not None and p != ap:
            door_pos[c] = p
            door_state[c] = s.doors[c]
    box_pos = [NOWHERE] * N_COLORS
    box_state = [ABSENT] * N_COLORS
    for c, p in enumerate(lay.box_pos):
        if p is not None:
            box_pos[c] = p
            box_state[c] = s.boxes[c]
    goal = lay.goal if lay.goal is not None and lay.goal != ap else NOWHERE
    return {
        "agent_pos": ap,
        "agent_dir": s.agent_dir,
        "front_pos": s.front,
        "goal_pos": goal,
        "key_pos": key_pos,
        "door_pos": door_pos,
        "door_state": door_state,
        "box_pos": box_pos,
        "box_state": box_state,
    }


def encode_grid(s: EnvState) -> np.ndarray:
    """N x N x 3 array of (object id, colour, state) cells, indexed [x, y]."""
    lay = s.layout
    g = np.zeros((lay.size, lay.size, 3), dtype=np.uint8)
    g[:, :, 0] = OBJ_EMPTY
    for (x, y) in lay.walls:
        g[x, y] = (OBJ_WALL, 5, 0)
    if lay.goal is not None:
        g[lay.goal] = (OBJ_GOAL, 1, 0)
    for c, p in enumerate(lay.door_pos):
        if p is not None:
            g[p] = (OBJ_DOOR, c, s.doors[c])
    for c, p in enumerate(lay.box_pos):
        if p is not None:
            g[p] = (OBJ_BOX, c, s.boxes[c])
    for c, p in enumerate(s.keys):
        if p is not None:
            g[p] = (OBJ_KEY, c, 0)
    g[s.agent_pos] = (OBJ_AGENT, max(s.carried, 0), s.agent_dir)
    return g


def new_state(layout: Layout, agent_pos, agent_dir, keys=None, doors=None, boxes=None,
              box_contents=None, carried=-1) -> EnvState:
    def fill(d, default):
        out = [default] * N_COLORS
        for c, v in (d or {}).items():
            out[c] = v
        return tuple(out)
    return EnvState(layout, tuple(agent_pos), agent_dir, carried, fill(keys, None),
                    fill(doors, ABSENT), fill(boxes, ABSENT), fill(box_contents, -1))


def border_walls(size: int) -> set:
    w = set()
    for i in range(size):
        w.update({(i, 0), (i, size - 1), (0, i), (size - 1, i)})
    return w
