import numpy as np
import pytest

from mrbt.formula import COLORS
from mrbt.gridworld.env import apply_action, predicates
from mrbt.gridworld.spaces import (
    VOCAB, expert_actions, load_map, make_task_space, plan_to,
)


def test_doorkey_full():
    sp = make_task_space("doorkey")
    assert (sp.size, sp.max_steps, sp.variables) == (16, 500, {})
    assert len(sp.tasks()) == 1


def test_lockedroom_full():
    sp = make_task_space("lockedroom")
    assert (sp.size, sp.max_steps) == (19, 190)
    assert set(sp.variables) == {"lockedroom_color", "keyroom_color", "door_color"}
    # variants where the locked door matches the key's colour and the key room differs
    assert len(sp.tasks()) == 30
    for t in sp.tasks():
        b = t.bindings
        assert b["door_color"] == b["lockedroom_color"] != b["keyroom_color"]


def test_dronesupplier_full_map():
    sp = make_task_space("dronesupplier")
    assert (sp.size, sp.max_steps) == (25, 500)
    assert len(sp.tasks()) == 36
    assert sp.goal_texts == ["door_state[door_color] == OPEN"]
    gm = load_map(which="full")
    assert gm.size == 25 and len(gm.free) == 376


def test_scaled_sizes_and_steps():
    assert make_task_space("doorkey", 8).max_steps == 250
    assert make_task_space("doorkey", "mini").size == 8
    lr = make_task_space("lockedroom", "mini")
    assert (lr.size, lr.max_steps) == (7, 70)
    assert make_task_space("dronesupplier", "mini").size == 9


def test_bad_names_and_scales():
    with pytest.raises(ValueError):
        make_task_space("maze")
    with pytest.raises(ValueError):
        make_task_space("lockedroom", 10)


def test_doorkey6_enumeration(doorkey6):
    task = doorkey6.tasks()[0]
    inits = list(doorkey6.initial_states(task))
    assert len(inits) == len(set(inits)) == 1088
    assert all(doorkey6.init_constraint(s, task) for s in inits[:50])


def test_task_text_and_encoding(lockedroom_mini):
    t = lockedroom_mini.make_task(lockedroom_color="red", keyroom_color="blue", door_color="red")
    assert t.text.startswith("get the red key from the blue room")
    assert all(isinstance(i, int) and i > 0 for i in t.encoding)
    assert len(t.encoding) == len(t.text.split())
    assert max(VOCAB.values()) == len(VOCAB)
    with pytest.raises(ValueError):
        lockedroom_mini.make_task(lockedroom_color="red")


@pytest.mark.parametrize("name,scale", [("doorkey", 8), ("lockedroom", "mini"), ("dronesupplier", "mini")])
def test_generated_episodes_solvable(name, scale):
    sp = make_task_space(name, scale)
    rng = np.random.default_rng(3)
    for _ in range(15):
        s, task = sp.sample_episode(rng)
        assert not task.complete(predicates(s))
        plan = expert_actions(sp, s, task)
        assert plan is not None and len(plan) <= sp.max_steps
        for a in plan:
            s = apply_action(s, a)
        assert task.complete(predicates(s))


def test_task_colours_vary(lockedroom_mini):
    rng = np.random.default_rng(0)
    seen = {lockedroom_mini.sample_episode(rng)[1].key for _ in range(200)}
    assert len(seen) > 15


def test_plan_to_trivial(doorkey6, rng):
    s, _ = doorkey6.sample_episode(rng)
    assert plan_to(s, lambda p: True) == []


def test_map_errors(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("####\n#..#\n####\n")
    with pytest.raises(ValueError, match="square"):
        load_map(p)
    p.write_text("#####\n#...#\n#...#\n#...#\n#####\n")
    with pytest.raises(ValueError, match="slots"):
        load_map(p)
    p.write_text("#####\n#.x.#\n#...#\n#...#\n#####\n")
    with pytest.raises(ValueError, match="character"):
        load_map(p)


def test_custom_map_path(tmp_path):
    from importlib import resources

    text = resources.files("mrbt.gridworld").joinpath("maps/dronesupplier_mini.txt").read_text()
    p = tmp_path / "m.txt"
    p.write_text(text)
    sp = make_task_space("dronesupplier", "mini", map_path=p)
    assert sp.size == 9 and len(sp.tasks()) == 6 * len(COLORS)
