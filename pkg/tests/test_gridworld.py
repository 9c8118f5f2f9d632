import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrbt.gridworld.env import (
    ACTIONS, CLOSED, DETERMINISTIC, DONE, DROP, FORWARD, LEFT, LOCKED, OPEN, PICKUP, RIGHT, TOGGLE, DIR_VEC,
    DynamicsConfig, Layout, apply_action, border_walls, encode_grid, new_state, predicates, step_env,
)
from mrbt.gridworld.trace import EpisodeTrace, read_episode_csv, state_hash

YELLOW, RED = 4, 0
NONE6 = (None,) * 6


def tiny_layout():
    # 5x5: border, inner wall column x=2 with a yellow door at (2, 2), goal (3, 3)
    walls = border_walls(5) | {(2, 1), (2, 3)}
    doors = list(NONE6)
    doors[YELLOW] = (2, 2)
    return Layout(5, frozenset(walls), (3, 3), tuple(doors), NONE6)


def state(pos=(1, 2), d=0, key=(1, 1), door=LOCKED, carried=-1, lay=None):
    lay = lay or tiny_layout()
    keys = {YELLOW: key} if key is not None else {}
    return new_state(lay, pos, d, keys=keys, doors={YELLOW: door}, carried=carried)


def test_toggle_locked_door_with_key():
    s = state(carried=YELLOW, key=None)
    assert apply_action(s, TOGGLE).doors[YELLOW] == OPEN


def test_toggle_locked_door_without_key():
    s = state()
    assert apply_action(s, TOGGLE) == s


def test_forward_into_wall():
    s = state(pos=(1, 1), d=3)
    assert apply_action(s, FORWARD) == s


def test_close_after_open():
    """Doors can be re-closed, so goal-style predicates are not monotone."""
    s = state(carried=YELLOW, key=None)
    s = apply_action(s, TOGGLE)
    assert predicates(s)["door_state"][YELLOW] == OPEN
    s = apply_action(s, TOGGLE)
    assert predicates(s)["door_state"][YELLOW] == CLOSED
    s = apply_action(s, TOGGLE)
    assert predicates(s)["door_state"][YELLOW] == OPEN


def test_agent_on_door_occludes_it():
    s = state(door=OPEN)
    s = apply_action(s, FORWARD)
    assert s.agent_pos == (2, 2)
    p = predicates(s)
    assert p["door_state"][YELLOW] == -1 and p["door_pos"][YELLOW] == (-1, -1)


def test_pickup_and_drop():
    s = state(d=3)  # facing the key at (1, 1)
    s = apply_action(s, PICKUP)
    assert s.carried == YELLOW and s.keys[YELLOW] is None
    assert predicates(s)["key_pos"][YELLOW] == (-1, -1)
    s = apply_action(s, DROP)
    assert s.carried == -1 and s.keys[YELLOW] == (1, 1)


def test_cannot_drop_on_wall_or_door():
    s = state(carried=YELLOW, key=None)  # facing the door
    assert apply_action(s, DROP) == s


def test_encode_grid():
    g = encode_grid(state())
    assert g.shape == (5, 5, 3)
    assert tuple(g[2, 2]) == (4, YELLOW, LOCKED)
    assert tuple(g[1, 1]) == (5, YELLOW, 0)


# ---------------------------------------------------------------- oracle

def ref_step(s, a):
    """Hand-written MiniGrid rules over a cell dictionary, independent of env.py."""
    cells = {}
    lay = s.layout
    for w in lay.walls:
        cells[w] = ("wall",)
    for c, p in enumerate(lay.door_pos):
        if p is not None:
            cells[p] = ("door", c, s.doors[c])
    for c, p in enumerate(s.keys):
        if p is not None:
            cells[p] = ("key", c)
    pos, d, carried = s.agent_pos, s.agent_dir, s.carried
    fx, fy = pos[0] + DIR_VEC[d][0], pos[1] + DIR_VEC[d][1]
    front = cells.get((fx, fy))
    if a == LEFT:
        d = (d + 3) % 4
    elif a == RIGHT:
        d = (d + 1) % 4
    elif a == FORWARD:
        if front is None or (front[0] == "door" and front[2] == OPEN):
            pos = (fx, fy)
    elif a == PICKUP:
        if carried < 0 and front is not None and front[0] == "key":
            carried = front[1]
            del cells[(fx, fy)]
    elif a == DROP:
        if carried >= 0 and front is None and (fx, fy) != lay.goal:
            cells[(fx, fy)] = ("key", carried)
            carried = -1
    elif a == TOGGLE:
        if front is not None and front[0] == "door":
            c, st_ = front[1], front[2]
            if st_ == LOCKED:
                st_ = OPEN if carried == c else LOCKED
            else:
                st_ = CLOSED if st_ == OPEN else OPEN
            cells[(fx, fy)] = ("door", c, st_)
    keys = [None] * 6
    doors = list(s.doors)
    for p, v in cells.items():
        if v[0] == "key":
            keys[v[1]] = p
        elif v[0] == "door":
            doors[v[1]] = v[2]
    return s._replace(agent_pos=pos, agent_dir=d, carried=carried, keys=tuple(keys), doors=tuple(doors))


def all_tiny_states():
    lay = tiny_layout()
    free = [(x, y) for x in range(5) for y in range(5) if (x, y) not in lay.walls]
    for pos, d, door in itertools.product(free, range(4), (OPEN, CLOSED, LOCKED)):
        if pos == (2, 2) and door != OPEN:
            continue
        yield state(pos, d, None, door, YELLOW, lay)
        for k in free:
            if k not in (pos, (2, 2), lay.goal):
                yield state(pos, d, k, door, -1, lay)


def test_exhaustive_small_grid_oracle():
    n = 0
    for s in all_tiny_states():
        for a in range(len(ACTIONS)):
            assert apply_action(s, a) == ref_step(s, a), (s, ACTIONS[a])
            n += 1
    assert n == 2772


def test_done_is_noop(doorkey6, rng):
    s, _ = doorkey6.sample_episode(rng)
    assert apply_action(s, DONE) == s


# ------------------------------------------------------------ stochastic

def key_count(s):
    on_grid = sum(p is not None for p in s.keys)
    in_box = sum(k >= 0 for k in s.box_contents)
    return on_grid + in_box + (s.carried >= 0)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["doorkey", "lockedroom", "dronesupplier"]), st.integers(0, 10_000),
       st.lists(st.integers(0, 6), min_size=1, max_size=80))
def test_key_conservation(name, seed, actions):
    from mrbt.gridworld.spaces import make_task_space

    space = make_task_space(name, "mini")
    rng = np.random.default_rng(seed)
    s, _ = space.sample_episode(rng)
    n0 = key_count(s)
    dyn = DynamicsConfig(stochastic=True, flip_prob=0.5)
    for a in actions:
        s = step_env(s, a, dyn, rng)
        assert key_count(s) == n0
        keys = [p for p in s.keys if p is not None]
        assert len(set(keys)) == len(keys)
        assert s.agent_pos not in keys


def test_drop_rate_calibration():
    dyn = DynamicsConfig(stochastic=True)
    rng = np.random.default_rng(7)
    s0 = state(pos=(1, 2), d=0, key=None, carried=YELLOW, door=OPEN)
    drops = sum(step_env(s0, LEFT, dyn, rng).carried < 0 for _ in range(10_000))
    assert abs(drops / 10_000 - 0.05) <= 0.01


def test_drop_goes_to_free_orthogonal_neighbour():
    dyn = DynamicsConfig(stochastic=True, flip_prob=1.0)
    rng = np.random.default_rng(0)
    s0 = state(pos=(1, 2), d=0, key=None, carried=YELLOW, door=OPEN)
    seen = set()
    for _ in range(200):
        s = step_env(s0, LEFT, dyn, rng)
        seen.add(s.keys[YELLOW])
    # (1,1) and (1,3) are free; (0,2) is wall, (2,2) is the door
    assert seen == {(1, 1), (1, 3)}


def test_drop_fails_without_free_neighbour():
    lay = tiny_layout()
    lay = Layout(5, lay.walls | {(1, 1), (1, 3)}, lay.goal, lay.door_pos, lay.box_pos)
    s0 = state(pos=(1, 2), key=None, carried=YELLOW, door=OPEN, lay=lay)
    s = step_env(s0, LEFT, DynamicsConfig(stochastic=True, flip_prob=1.0), np.random.default_rng(0))
    assert s.carried == YELLOW


def test_dynamics_config_validation():
    assert DETERMINISTIC.flip_prob == 0.0
    assert DynamicsConfig(stochastic=True).flip_prob == 0.05
    with pytest.raises(ValueError):
        DynamicsConfig(stochastic=False, flip_prob=0.1)
    with pytest.raises(ValueError):
        DynamicsConfig(stochastic=True, flip_prob=1.5)
    with pytest.raises(ValueError):
        step_env(state(carried=YELLOW, key=None), LEFT, DynamicsConfig(stochastic=True))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 6), max_size=40))
def test_deterministic_step_is_pure(actions):
    s = t = state(d=3)
    for a in actions:
        s = step_env(s, a)
        t = apply_action(t, a)
        assert s == t


# --------------------------------------------------------------- traces

def test_state_hash_stable():
    assert state_hash(state()) == state_hash(state())
    assert state_hash(state()) != state_hash(state(d=1))
    assert len(state_hash(state())) == 16


def test_episode_trace_csv(tmp_path):
    tr = EpisodeTrace()
    s = state()
    for t, a in enumerate([LEFT, FORWARD, DONE]):
        tr.record(t, s, a, 0.5 * t, a == DONE)
        s = apply_action(s, a)
    rows = read_episode_csv(tr.write(tmp_path / "ep.csv"))
    assert [r["action"] for r in rows] == ["left", "forward", "done"]
    assert rows[-1]["done"] is True and rows[2]["reward"] == 1.0
    assert (tmp_path / "ep.csv").read_text().splitlines()[0] == "t,state_hash,action,reward,done"
