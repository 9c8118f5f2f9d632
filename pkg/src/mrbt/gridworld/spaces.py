"""DoorKey, LockedRoom and DroneSupplier task spaces.

Each space bundles the natural-language template, the colour-valued task
variables, the goal formulas, a seeded episode generator and, for the
verifier, an enumeration of initial states per task.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from ..formula import CLOSED, COLOR_INDEX, COLORS, LOCKED, NOWHERE, OPEN, EnvSchema, Formula, parse_formula
from .env import (
    ACTIONS,
    EnvState,
    Layout,
    N_COLORS,
    apply_action,
    border_walls,
    make_schema,
    new_state,
    predicates,
)

SPACE_NAMES = ("doorkey", "lockedroom", "dronesupplier")

FULL_SIZE = {"doorkey": 16, "lockedroom": 19, "dronesupplier": 25}
FULL_STEPS = {"doorkey": 500, "lockedroom": 190, "dronesupplier": 500}
MINI_SIZE = {"doorkey": 8, "lockedroom": 7, "dronesupplier": 9}

TEMPLATES = {
    "doorkey": "use the key to open the door and then get to the goal",
    "lockedroom": "get the {lockedroom_color} key from the {keyroom_color} room, "
                  "unlock the {door_color} door and go to the goal",
    "dronesupplier": "open the {box_color} box, pick up the key, then open the {door_color} door",
}

GOALS = {
    "doorkey": ["agent_pos == goal_pos || goal_pos == -1"],
    "lockedroom": ["agent_pos == goal_pos || goal_pos == -1"],
    "dronesupplier": ["door_state[door_color] == OPEN"],
}

# Hand-written reference formulas. Objects the
# agent can stand on are also accepted when occluded (-1).
NAV = ["left", "right", "forward"]
REFERENCE_SUBTASKS = {
    "doorkey": [
        dict(name="Acquire Key", psi="key_pos[yellow] == -1", phi="front_pos == key_pos[yellow]",
             nav=NAV, interact=["left", "right", "pickup"]),
        dict(name="Open Door", psi="door_state[yellow] == OPEN || door_state[yellow] == -1",
             phi="manhattan(agent_pos, door_pos[yellow]) <= 1 || door_state[yellow] == -1",
             nav=NAV, interact=["left", "right", "toggle"]),
        dict(name="Reach Goal", psi="agent_pos == goal_pos || goal_pos == -1",
             phi="manhattan(agent_pos, goal_pos) <= 1 || goal_pos == -1",
             nav=NAV, interact=["left", "right", "forward"]),
    ],
    "lockedroom": [
        dict(name="Open key-room door",
             psi="door_state[keyroom_color] == OPEN || door_state[keyroom_color] == -1",
             phi="manhattan(agent_pos, door_pos[keyroom_color]) <= 1 || door_state[keyroom_color] == -1",
             nav=NAV, interact=["left", "right", "toggle"]),
        dict(name="Pick up key", psi="key_pos[lockedroom_color] == -1",
             phi="front_pos == key_pos[lockedroom_color]",
             nav=NAV, interact=["left", "right", "pickup"]),
        dict(name="Unlock/open locked door",
             psi="door_state[door_color] == OPEN || door_state[door_color] == -1",
             phi="manhattan(agent_pos, door_pos[door_color]) <= 1 || door_state[door_color] == -1",
             nav=NAV, interact=["left", "right", "toggle"]),
        dict(name="Reach goal", psi="agent_pos == goal_pos || goal_pos == -1",
             phi="manhattan(agent_pos, goal_pos) <= 1 || goal_pos == -1",
             nav=NAV, interact=["left", "right", "forward"]),
    ],
    "dronesupplier": [
        dict(name="Open the box", psi="box_state[box_color] == OPEN",
             phi="manhattan(agent_pos, box_pos[box_color]) <= 1",
             nav=NAV, interact=["left", "right", "toggle"]),
        dict(name="Pick up the key", psi="key_pos[door_color] == -1 && box_state[box_color] == OPEN",
             phi="front_pos == key_pos[door_color]",
             nav=NAV, interact=["left", "right", "pickup"]),
        dict(name="Open the door", psi="door_state[door_color] == OPEN",
             phi="manhattan(agent_pos, door_pos[door_color]) <= 1",
             nav=NAV, interact=["left", "right", "toggle"]),
    ],
}


def _vocabulary() -> dict:
    words = set(COLORS)
    for t in TEMPLATES.values():
        words.update(w.strip(",") for w in t.split() if not w.startswith("{"))
    return {w: i + 1 for i, w in enumerate(sorted(words))}


VOCAB = _vocabulary()


@dataclass(frozen=True)
class Task:
    template: str
    bindings: dict = field(hash=False)
    goal: tuple  # Formulas; the task is complete when all hold

    @property
    def text(self) -> str:
        return self.template.format(**{k: COLORS[v] for k, v in self.bindings.items()})

    @property
    def encoding(self) -> tuple:
        return tuple(VOCAB.get(w.strip(","), 0) for w in self.text.split())

    @property
    def key(self) -> tuple:
        return tuple(sorted(self.bindings.items()))

    def __hash__(self):
        return hash((self.template, self.key))

    def __eq__(self, other):
        return isinstance(other, Task) and self.template == other.template and self.key == other.key

    def complete(self, preds) -> bool:
        return all(g.compiled(preds, self.bindings) for g in self.goal)


@dataclass
class TaskSpace:
    """A task space plus its environment schema and episode generator."""

    name: str
    template: str
    variables: dict  # name -> tuple of colour names
    schema: EnvSchema
    goal_texts: list
    max_steps: int
    size: int
    scale: str
    _tasks: list = field(repr=False, default_factory=list)
    _sample: Callable = field(repr=False, default=None)
    _inits: Callable = field(repr=False, default=None)
    enumerable: bool = True
    subgoals: Callable = field(repr=False, default=None)

    @property
    def grid_size(self) -> int:
        return self.size

    def tasks(self) -> list:
        return list(self._tasks)

    def task_index(self, task: Task) -> int:
        return self._tasks.index(task)

    def sample_episode(self, rng: np.random.Generator) -> tuple[EnvState, Task]:
        return self._sample(rng)

    def episodes(self, seed: int = 0) -> Iterator[tuple[EnvState, Task]]:
        rng = np.random.default_rng(seed)
        while True:
            yield self._sample(rng)

    def initial_states(self, task: Task, rng: np.random.Generator | None = None, limit: int | None = None):
        """Initial states for verification: exhaustive when ``enumerable``,
        otherwise ``limit`` seeded samples."""
        if self.enumerable:
            yield from self._inits(task)
            return
        rng = rng if rng is not None else np.random.default_rng(0)
        seen = set()
        tries = 0
        limit = limit or 64
        while len(seen) < limit and tries < limit * 20:
            tries += 1
            s = self._inits(task, rng)
            if s not in seen:
                seen.add(s)
                yield s

    def parse(self, text: str) -> Formula:
        return parse_formula(text, self.schema, self.variables.keys())

    def goal_formulas(self) -> tuple:
        return tuple(self.parse(t) for t in self.goal_texts)

    def make_task(self, **bindings) -> Task:
        b = {k: (COLOR_INDEX[v] if isinstance(v, str) else int(v)) for k, v in bindings.items()}
        if set(b) != set(self.variables):
            raise ValueError(f"bindings must cover exactly {sorted(self.variables)}")
        return Task(self.template, b, self.goal_formulas())

    def init_constraint(self, s: EnvState, task: Task) -> bool:
        """Membership in the task's initial-state set (layout-level check when
        the set is too large to enumerate)."""
        if not self.enumerable:
            return s.layout.size == self.size
        cache = self.__dict__.setdefault("_init_sets", {})
        if task not in cache:
            cache[task] = frozenset(self._inits(task))
        return s in cache[task]


# ------------------------------------------------------------------ DoorKey

def _doorkey_layout(size, split, door_y):
    walls = border_walls(size)
    walls.update((split, y) for y in range(1, size - 1) if y != door_y)
    yellow = COLOR_INDEX["yellow"]
    doors = [None] * N_COLORS
    doors[yellow] = (split, door_y)
    return Layout(size, frozenset(walls), (size - 2, size - 2), tuple(doors), (None,) * N_COLORS)


def _doorkey_state(lay, agent, d, key):
    yellow = COLOR_INDEX["yellow"]
    return new_state(lay, agent, d, keys={yellow: key}, doors={yellow: LOCKED})


def _doorkey(size, scale) -> TaskSpace:
    if size < 5:
        raise ValueError("doorkey needs size >= 5")
    layouts = {}

    def layout(split, door_y):
        k = (split, door_y)
        if k not in layouts:
            layouts[k] = _doorkey_layout(size, split, door_y)
        return layouts[k]

    def sample(rng):
        split = int(rng.integers(2, size - 2))
        door_y = int(rng.integers(1, size - 1))
        lay = layout(split, door_y)
        cells = [(x, y) for x in range(1, split) for y in range(1, size - 1)]
        i, j = rng.choice(len(cells), size=2, replace=False)
        return _doorkey_state(lay, cells[i], int(rng.integers(4)), cells[j]), task

    def inits(task, rng=None):
        if rng is not None:
            return sample(rng)[0]
        return _doorkey_inits()

    def _doorkey_inits():
        for split in range(2, size - 2):
            for door_y in range(1, size - 1):
                lay = layout(split, door_y)
                cells = [(x, y) for x in range(1, split) for y in range(1, size - 1)]
                for key in cells:
                    for agent in cells:
                        if agent == key:
                            continue
                        for d in range(4):
                            yield _doorkey_state(lay, agent, d, key)

    sp = TaskSpace("doorkey", TEMPLATES["doorkey"], {}, make_schema(size), GOALS["doorkey"],
                   _steps("doorkey", size), size, scale, enumerable=size <= 8)
    task = Task(sp.template, {}, sp.goal_formulas())
    sp._tasks = [task]
    sp._sample = sample
    sp._inits = inits
    sp.subgoals = _doorkey_subgoals
    return sp


def _doorkey_subgoals(task, drop_key=False):
    y = COLOR_INDEX["yellow"]
    goals = [
        lambda p: p["key_pos"][y] == NOWHERE,
        lambda p: p["door_state"][y] in (OPEN, -1),
    ]
    if drop_key:
        goals.append(lambda p: p["key_pos"][y] != NOWHERE)
    goals.append(lambda p: task.complete(p))
    return goals


# --------------------------------------------------------------- LockedRoom

@dataclass(frozen=True)
class _RoomGeometry:
    room_w: int
    room_h: int
    hall_w: int

    @property
    def size(self):
        return 2 * self.room_w + self.hall_w + 4

    def slot_cells(self, slot):
        j = slot % 3
        y0 = 1 + j * (self.room_h + 1)
        if slot < 3:
            xs = range(1, self.room_w + 1)
        else:
            x0 = self.room_w + self.hall_w + 3
            xs = range(x0, x0 + self.room_w)
        return [(x, y) for x in xs for y in range(y0, y0 + self.room_h)]

    def door_options(self, slot):
        j = slot % 3
        y0 = 1 + j * (self.room_h + 1)
        x = self.room_w + 1 if slot < 3 else self.room_w + self.hall_w + 2
        return [(x, y) for y in range(y0, y0 + self.room_h)]

    def hallway(self):
        x0 = self.room_w + 2
        return [(x, y) for x in range(x0, x0 + self.hall_w) for y in range(1, self.size - 1)]

    def walls(self, door_cells):
        n = self.size
        w = border_walls(n)
        xl = self.room_w + 1
        xr = self.room_w + self.hall_w + 2
        for y in range(1, n - 1):
            w.add((xl, y))
            w.add((xr, y))
        for j in range(1, 3):
            y = j * (self.room_h + 1)
            for x in list(range(1, xl)) + list(range(xr + 1, n - 1)):
                w.add((x, y))
        return w - set(door_cells)


def _lockedroom(geo: _RoomGeometry, scale) -> TaskSpace:
    size = geo.size
    colors = range(N_COLORS)
    tasks_b = [dict(lockedroom_color=lc, keyroom_color=kc, door_color=lc)
               for lc in colors for kc in colors if kc != lc]

    def build(slot_color, locked_slot, key_slot, door_rows, key, goal, agent, d):
        door_pos = [None] * N_COLORS
        cells = []
        for slot, c in enumerate(slot_color):
            p = geo.door_options(slot)[door_rows[slot]]
            door_pos[c] = p
            cells.append(p)
        lay = Layout(size, frozenset(geo.walls(cells)), goal, tuple(door_pos), (None,) * N_COLORS)
        lc = slot_color[locked_slot]
        doors = {c: (LOCKED if c == lc else CLOSED) for c in slot_color}
        return new_state(lay, agent, d, keys={lc: key}, doors=doors)

    def sample(rng):
        slot_color = [int(c) for c in rng.permutation(N_COLORS)]
        locked_slot, key_slot = (int(v) for v in rng.choice(6, size=2, replace=False))
        door_rows = [int(rng.integers(geo.room_h)) for _ in range(6)]
        key = _pick(rng, geo.slot_cells(key_slot))
        goal = _pick(rng, geo.slot_cells(locked_slot))
        agent = _pick(rng, geo.hallway())
        s = build(slot_color, locked_slot, key_slot, door_rows, key, goal, agent, int(rng.integers(4)))
        lc, kc = slot_color[locked_slot], slot_color[key_slot]
        return s, sp.make_task(lockedroom_color=lc, keyroom_color=kc, door_color=lc)

    def inits(task, rng=None):
        # canonical room colouring for verification: slot i holds colour i
        lc = task.bindings["lockedroom_color"]
        kc = task.bindings["keyroom_color"]
        slot_color = list(range(N_COLORS))
        if rng is not None:
            door_rows = [int(rng.integers(geo.room_h)) for _ in range(6)]
            return build(slot_color, lc, kc, door_rows, _pick(rng, geo.slot_cells(kc)),
                         _pick(rng, geo.slot_cells(lc)), _pick(rng, geo.hallway()), int(rng.integers(4)))
        return _enum(slot_color, lc, kc)

    def _enum(slot_color, lc, kc):
        for door_rows in itertools.product(range(geo.room_h), repeat=6):
            for key in geo.slot_cells(kc):
                for goal in geo.slot_cells(lc):
                    for agent in geo.hallway():
                        for d in range(4):
                            yield build(slot_color, lc, kc, list(door_rows), key, goal, agent, d)

    sp = TaskSpace("lockedroom", TEMPLATES["lockedroom"],
                   {"lockedroom_color": COLORS, "keyroom_color": COLORS, "door_color": COLORS},
                   make_schema(size), GOALS["lockedroom"], _steps("lockedroom", size), size, scale,
                   enumerable=geo.room_h * geo.room_w == 1)
    sp._tasks = [sp.make_task(**b) for b in tasks_b]
    sp._sample = sample
    sp._inits = inits
    sp.subgoals = _lockedroom_subgoals
    return sp


def _lockedroom_subgoals(task, drop_key=False):
    b = task.bindings
    kc, lc = b["keyroom_color"], b["lockedroom_color"]
    goals = [
        lambda p: p["door_state"][kc] in (OPEN, -1),
        lambda p: p["key_pos"][lc] == NOWHERE,
        lambda p: p["door_state"][lc] in (OPEN, -1),
    ]
    if drop_key:
        goals.append(lambda p: p["key_pos"][lc] != NOWHERE)
    goals.append(lambda p: task.complete(p))
    return goals


# ------------------------------------------------------------ DroneSupplier

@dataclass(frozen=True)
class GridMap:
    size: int
    walls: frozenset
    box_slots: tuple
    door_slots: tuple
    free: tuple


def load_map(path: str | Path | None = None, which: str = "full") -> GridMap:
    """Read a text map: ``#`` wall, ``.`` free, ``B``/``D`` box and door slots."""
    if path is None:
        text = resources.files("mrbt.gridworld").joinpath(f"maps/dronesupplier_{which}.txt").read_text()
    else:
        text = Path(path).read_text()
    rows = [r.rstrip("\n") for r in text.splitlines() if r.strip() and not r.startswith(";")]
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ValueError(f"map must be square, got {n} rows of lengths {sorted({len(r) for r in rows})}")
    walls, boxes, doors, free = set(), [], [], []
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch == "#":
                walls.add((x, y))
            elif ch == "B":
                boxes.append((x, y))
            elif ch == "D":
                doors.append((x, y))
            elif ch == ".":
                free.append((x, y))
            else:
                raise ValueError(f"bad map character {ch!r} at ({x}, {y})")
    walls |= border_walls(n)
    if len(boxes) != N_COLORS or len(doors) != N_COLORS:
        raise ValueError(f"map needs {N_COLORS} box and door slots, got {len(boxes)} and {len(doors)}")
    free = [p for p in free if p not in walls]
    gm = GridMap(n, frozenset(walls), tuple(boxes), tuple(doors), tuple(free))
    _check_map(gm)
    return gm


def _check_map(gm: GridMap):
    blocked = set(gm.walls) | set(gm.box_slots) | set(gm.door_slots)
    start = gm.free[0]
    seen = {start}
    q = deque([start])
    while q:
        x, y = q.popleft()
        for p in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if p not in blocked and p not in seen and 0 <= p[0] < gm.size and 0 <= p[1] < gm.size:
                seen.add(p)
                q.append(p)
    if len(seen) != len(gm.free):
        raise ValueError("map free cells are not connected")
    for p in gm.box_slots + gm.door_slots:
        x, y = p
        if not any(q in seen for q in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))):
            raise ValueError(f"object slot {p} has no reachable neighbour")


def _dronesupplier(gm: GridMap, scale) -> TaskSpace:
    size = gm.size

    def build(box_color_slots, door_color_slots, bc, dc, agent, d):
        box_pos = [None] * N_COLORS
        door_pos = [None] * N_COLORS
        for slot, c in enumerate(box_color_slots):
            box_pos[c] = gm.box_slots[slot]
        for slot, c in enumerate(door_color_slots):
            door_pos[c] = gm.door_slots[slot]
        lay = Layout(size, gm.walls, None, tuple(door_pos), tuple(box_pos))
        return new_state(lay, agent, d, doors={c: LOCKED for c in range(N_COLORS)},
                         boxes={c: CLOSED for c in range(N_COLORS)}, box_contents={bc: dc})

    def sample(rng):
        bperm = [int(c) for c in rng.permutation(N_COLORS)]
        dperm = [int(c) for c in rng.permutation(N_COLORS)]
        bc, dc = int(rng.integers(N_COLORS)), int(rng.integers(N_COLORS))
        s = build(bperm, dperm, bc, dc, _pick(rng, gm.free), int(rng.integers(4)))
        return s, sp.make_task(box_color=bc, door_color=dc)

    def inits(task, rng=None):
        bc, dc = task.bindings["box_color"], task.bindings["door_color"]
        canon = list(range(N_COLORS))
        if rng is not None:
            return build(canon, canon, bc, dc, _pick(rng, gm.free), int(rng.integers(4)))
        return (build(canon, canon, bc, dc, a, d) for a in gm.free for d in range(4))

    sp = TaskSpace("dronesupplier", TEMPLATES["dronesupplier"],
                   {"box_color": COLORS, "door_color": COLORS}, make_schema(size),
                   GOALS["dronesupplier"], _steps("dronesupplier", size), size, scale,
                   enumerable=size <= MINI_SIZE["dronesupplier"])
    sp._tasks = [sp.make_task(box_color=b, door_color=d) for b in range(N_COLORS) for d in range(N_COLORS)]
    sp._sample = sample
    sp._inits = inits
    sp.subgoals = _drone_subgoals
    return sp


def _drone_subgoals(task, drop_key=False):
    bc, dc = task.bindings["box_color"], task.bindings["door_color"]
    goals = [
        lambda p: p["box_state"][bc] == OPEN,
        lambda p: p["key_pos"][dc] == NOWHERE,
    ]
    if drop_key:
        goals.append(lambda p: p["key_pos"][dc] != NOWHERE)
    goals.append(lambda p: task.complete(p))
    return goals


# ------------------------------------------------------------------ helpers

def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _steps(name, size):
    return max(1, round(FULL_STEPS[name] * size / FULL_SIZE[name]))


def make_task_space(name: str, scale: str | int | None = None, map_path: str | Path | None = None) -> TaskSpace:
    """Build a task space.

    ``scale`` is ``None``/``"full"`` for the original grid sizes, ``"mini"`` for
    the desk-scale reductions, or an integer grid size (DoorKey only).
    """
    if name not in SPACE_NAMES:
        raise ValueError(f"unknown task space {name!r}; expected one of {SPACE_NAMES}")
    label = "full" if scale in (None, "full") else str(scale)
    if name == "doorkey":
        if scale in (None, "full"):
            size = FULL_SIZE[name]
        elif scale == "mini":
            size = MINI_SIZE[name]
        else:
            size = int(scale)
        return _doorkey(size, label)
    if isinstance(scale, int) or (isinstance(scale, str) and scale.isdigit()):
        raise ValueError(f"{name} supports scale 'full' or 'mini' only")
    if name == "lockedroom":
        geo = _RoomGeometry(6, 5, 3) if label == "full" else _RoomGeometry(1, 1, 1)
        return _lockedroom(geo, label)
    gm = load_map(map_path, "full" if label == "full" else "mini")
    return _dronesupplier(gm, label)


# ------------------------------------------------------------ expert planner

def plan_to(s: EnvState, goal: Callable[[dict], bool], max_depth: int = 400) -> list | None:
    """Shortest action sequence (deterministic dynamics) reaching a state
    whose predicate view satisfies ``goal``."""
    if goal(predicates(s)):
        return []
    parent = {s: None}
    q = deque([s])
    depth = {s: 0}
    while q:
        u = q.popleft()
        if depth[u] >= max_depth:
            continue
        for a in range(len(ACTIONS)):
            v = apply_action(u, a)
            if v in parent:
                continue
            parent[v] = (u, a)
            depth[v] = depth[u] + 1
            if goal(predicates(v)):
                path = []
                while parent[v] is not None:
                    v, act = parent[v]
                    path.append(act)
                return path[::-1]
            q.append(v)
    return None


def expert_actions(space: TaskSpace, s: EnvState, task: Task, drop_key: bool = False) -> list | None:
    actions = []
    for g in space.subgoals(task, drop_key=drop_key):
        plan = plan_to(s, g)
        if plan is None:
            return None
        for a in plan:
            s = apply_action(s, a)
        actions.extend(plan)
    return actions
