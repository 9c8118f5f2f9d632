"""Task-relative observation features computed from the full grid state.

The tabular learner keys its table on these features instead of the raw
state so that what it learns transfers across layouts and colour variants.
"""

from __future__ import annotations

import numpy as np

from ..gridworld.env import DIR_VEC, EnvState

# front-cell codes
F_EMPTY, F_WALL, F_DOOR_SHUT, F_DOOR_OPEN, F_KEY, F_BOX_SHUT, F_BOX_OPEN, F_GOAL = range(8)
N_FRONT = 8


def objects_of_interest(space_name: str, bindings: dict) -> list:
    """(kind, colour) pairs a task is about; ``("goal", None)`` for the goal cell."""
    if space_name == "doorkey":
        y = 4  # yellow
        return [("key", y), ("door", y), ("goal", None)]
    if space_name == "lockedroom":
        kc, lc = bindings["keyroom_color"], bindings["lockedroom_color"]
        return [("door", kc), ("key", lc), ("door", bindings["door_color"]), ("goal", None)]
    if space_name == "dronesupplier":
        bc, dc = bindings["box_color"], bindings["door_color"]
        return [("box", bc), ("key", dc), ("door", dc)]
    raise ValueError(f"unknown task space {space_name!r}")


def front_code(s: EnvState) -> int:
    lay = s.layout
    f = s.front
    if not lay.in_bounds(f) or f in lay.walls:
        return F_WALL
    d = lay.door_at.get(f)
    if d is not None:
        return F_DOOR_OPEN if s.doors[d] == 0 else F_DOOR_SHUT
    b = lay.box_at.get(f)
    if b is not None:
        return F_BOX_OPEN if s.boxes[b] == 0 else F_BOX_SHUT
    if f in s.keys:
        return F_KEY
    if f == lay.goal:
        return F_GOAL
    return F_EMPTY


def _object(s: EnvState, kind, c):
    """(position or None, state) of one object."""
    lay = s.layout
    if kind == "goal":
        return lay.goal, 0
    if kind == "door":
        return lay.door_pos[c], s.doors[c]
    if kind == "box":
        return lay.box_pos[c], s.boxes[c]
    p = s.keys[c]
    if p is None:
        if s.carried == c:
            return None, 1
        for b, k in enumerate(s.box_contents):
            if k == c:
                return (lay.box_pos[b], 2) if s.boxes[b] == 0 else (None, 3)
        return None, -1
    return p, 0


def _clip(v, c):
    return -c if v < -c else (c if v > c else v)


def feature_key(s: EnvState, objects, clip: int = 3) -> tuple:
    ax, ay = s.agent_pos
    out = [s.agent_dir, front_code(s), s.carried >= 0]
    for kind, c in objects:
        p, st = _object(s, kind, c)
        if p is None:
            out.append((None, st))
        else:
            out.append((_clip(p[0] - ax, clip), _clip(p[1] - ay, clip), st))
    return tuple(out)


def feature_vector(s: EnvState, objects, size: int) -> np.ndarray:
    """Dense float encoding for the small policy-gradient network."""
    ax, ay = s.agent_pos
    v = [0.0] * 4
    v[s.agent_dir] = 1.0
    fc = [0.0] * N_FRONT
    fc[front_code(s)] = 1.0
    v += fc
    v.append(1.0 if s.carried >= 0 else 0.0)
    for kind, c in objects:
        p, st = _object(s, kind, c)
        onehot = [0.0] * 5
        onehot[st + 1] = 1.0
        if p is None:
            v += [0.0, 0.0, 0.0]
        else:
            dx, dy = (p[0] - ax) / size, (p[1] - ay) / size
            v += [dx, dy, 1.0]
        v += onehot
    # the agent's heading in world frame helps with relative offsets
    v += list(DIR_VEC[s.agent_dir])
    return np.asarray(v, dtype=np.float64)


def feature_dim(n_objects: int) -> int:
    return 4 + N_FRONT + 1 + n_objects * 8 + 2
