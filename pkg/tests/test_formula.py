import pytest
from hypothesis import given, settings, strategies as st

from mrbt.formula import (
    COLORS, NOWHERE, And, BoolConst, Cmp, Coord2Const, FnCall, FormulaSyntaxError, FormulaTypeError, Implies,
    IntConst, Not, Or, PredRef, TaskVarRef, UnknownPredicateError, UnknownTaskVariableError, parse_formula, to_text,
)

PSI = "door_state[room_color] == OPEN || door_state[room_color] == -1"
PHI = "manhattan(agent_pos, door_pos[room_color]) <= 1 || door_state[room_color] == -1"


def preds(**over):
    p = {
        "agent_pos": (1, 1), "agent_dir": 0, "front_pos": (2, 1), "goal_pos": (5, 5),
        "key_pos": [NOWHERE] * 6, "door_pos": [NOWHERE] * 6, "door_state": [-1] * 6,
        "box_pos": [NOWHERE] * 6, "box_state": [-1] * 6,
    }
    p.update(over)
    return p


def with_door(state, pos=(2, 4), color=0):
    ds = [-1] * 6
    ds[color] = state
    dp = [NOWHERE] * 6
    dp[color] = pos
    return {"door_state": ds, "door_pos": dp}


def test_psi_parses_to_or_of_two_cmps(schema):
    f = parse_formula(PSI, schema, {"room_color"})
    assert isinstance(f.ast, Or)
    assert len(f.ast.args) == 2
    assert all(isinstance(a, Cmp) and a.op == "==" for a in f.ast.args)


def test_phi_shape(schema):
    f = parse_formula(PHI, schema, {"room_color"})
    lhs, rhs = f.ast.args
    assert lhs.op == "<=" and isinstance(lhs.lhs, FnCall) and lhs.lhs.name == "manhattan"
    assert rhs.op == "=="


def test_true_constant(schema):
    assert parse_formula("true", schema).ast == BoolConst(True)


def test_psi_eval(schema):
    f = parse_formula(PSI, schema, {"room_color"})
    red = {"room_color": 0}
    assert f(preds(**with_door(0)), red)
    assert not f(preds(**with_door(2)), red)
    # occluded door reads -1
    assert f(preds(), red)


def test_phi_distance_one(schema):
    f = parse_formula(PHI, schema, {"room_color"})
    p = preds(agent_pos=(2, 3), **with_door(1, pos=(2, 4)))
    assert f(p, {"room_color": 0})
    p = preds(agent_pos=(2, 2), **with_door(1, pos=(2, 4)))
    assert not f(p, {"room_color": 0})


@pytest.mark.parametrize("text,exc", [
    ("door_state[red] ==", FormulaSyntaxError),
    ("door_stat[red] == OPEN", UnknownPredicateError),
    ("door_state[room] == OPEN", UnknownTaskVariableError),
    ("agent_pos == 3", FormulaTypeError),
    ("agent_pos < key_pos[red]", FormulaTypeError),
    ("door_state == OPEN", FormulaTypeError),
    ("", FormulaSyntaxError),
])
def test_errors(schema, text, exc):
    with pytest.raises(exc):
        parse_formula(text, schema, set())


def test_syntax_error_has_position(schema):
    with pytest.raises(FormulaSyntaxError) as ei:
        parse_formula("door_state[red] == OPEN &&\n  (", schema)
    assert ei.value.line == 2


def test_coord_sentinel_literal(schema):
    f = parse_formula("key_pos[yellow] == -1", schema)
    assert f(preds(), {})
    kp = [NOWHERE] * 6
    kp[4] = (3, 3)
    assert not f(preds(key_pos=kp), {})


def test_implication_right_assoc(schema):
    f = parse_formula("true -> false -> true", schema)
    assert isinstance(f.ast.rhs, Implies)


# ------------------------------------------------------------ generated ASTs

colors = st.sampled_from(range(6)).map(lambda c: IntConst(c, COLORS[c]))
color_idx = st.one_of(colors, st.just(TaskVarRef("room_color")))
scalar_pred = color_idx.flatmap(lambda c: st.sampled_from([PredRef("door_state", c), PredRef("box_state", c)]))
coord_pred = st.one_of(
    st.sampled_from([PredRef("agent_pos"), PredRef("front_pos"), PredRef("goal_pos")]),
    color_idx.flatmap(lambda c: st.sampled_from([PredRef("key_pos", c), PredRef("door_pos", c)])),
)
small = st.integers(-1, 7)
coords = st.tuples(st.integers(-1, 7), st.integers(-1, 7)).map(lambda t: Coord2Const(*t))
scalar_const = st.one_of(small.map(IntConst), st.sampled_from([IntConst(0, "OPEN"), IntConst(1, "CLOSED"),
                                                              IntConst(2, "LOCKED")]))
atoms = st.one_of(
    st.builds(Cmp, st.sampled_from(["==", "!=", "<", "<=", ">", ">="]), scalar_pred, scalar_const),
    st.builds(Cmp, st.sampled_from(["==", "!="]), coord_pred, st.one_of(coord_pred, coords)),
    st.builds(lambda a, b, op, n: Cmp(op, FnCall("manhattan", (a, b)), IntConst(n)), coord_pred, coord_pred,
              st.sampled_from(["<=", "==", ">"]), st.integers(0, 6)),
    st.builds(BoolConst, st.booleans()),
)


def _flat(cls, parts):
    out = []
    for p in parts:
        out.extend(p.args if isinstance(p, cls) else [p])
    return cls(tuple(out))


formulas = st.recursive(atoms, lambda sub: st.one_of(
    st.builds(Not, sub),
    st.lists(sub, min_size=2, max_size=3).map(lambda xs: And(tuple(xs))),
    st.lists(sub, min_size=2, max_size=3).map(lambda xs: Or(tuple(xs))),
    st.builds(Implies, sub, sub),
), max_leaves=8)


def ref_eval(node, p, b):
    """Direct recursive interpreter kept independent of the compiled evaluator."""
    if isinstance(node, BoolConst):
        return node.value
    if isinstance(node, And):
        return all(ref_eval(a, p, b) for a in node.args)
    if isinstance(node, Or):
        return any(ref_eval(a, p, b) for a in node.args)
    if isinstance(node, Not):
        return not ref_eval(node.arg, p, b)
    if isinstance(node, Implies):
        return (not ref_eval(node.lhs, p, b)) or ref_eval(node.rhs, p, b)
    if isinstance(node, Cmp):
        x, y = ref_val(node.lhs, p, b), ref_val(node.rhs, p, b)
        if isinstance(x, tuple) or isinstance(y, tuple):
            x = x if isinstance(x, tuple) else (x, x)
            y = y if isinstance(y, tuple) else (y, y)
        return {"==": x == y, "!=": x != y, "<": x < y, "<=": x <= y, ">": x > y, ">=": x >= y}[node.op]
    raise AssertionError(node)


def ref_val(node, p, b):
    if isinstance(node, IntConst):
        return node.value
    if isinstance(node, Coord2Const):
        return (node.x, node.y)
    if isinstance(node, TaskVarRef):
        return b[node.name]
    if isinstance(node, PredRef):
        v = p[node.name]
        return v if node.index is None else v[ref_val(node.index, p, b)]
    if isinstance(node, FnCall):
        (ax, ay), (bx, by) = (ref_val(a, p, b) for a in node.args)
        return abs(ax - bx) + abs(ay - by)
    raise AssertionError(node)


pos = st.tuples(st.integers(-1, 7), st.integers(-1, 7))
states = st.fixed_dictionaries({
    "agent_pos": pos, "agent_dir": st.integers(0, 3), "front_pos": pos, "goal_pos": pos,
    "key_pos": st.lists(pos, min_size=6, max_size=6), "door_pos": st.lists(pos, min_size=6, max_size=6),
    "door_state": st.lists(st.integers(-1, 2), min_size=6, max_size=6),
    "box_pos": st.lists(pos, min_size=6, max_size=6),
    "box_state": st.lists(st.integers(-1, 1), min_size=6, max_size=6),
})
bindings = st.fixed_dictionaries({"room_color": st.integers(0, 5)})


@settings(max_examples=300, deadline=None)
@given(formulas)
def test_print_parse_roundtrip(schema, ast):
    text = to_text(ast)
    f = parse_formula(text, schema, {"room_color"})
    assert f.ast == ast, text


@settings(max_examples=300, deadline=None)
@given(formulas, states, bindings)
def test_compiled_matches_reference_interpreter(schema, ast, p, b):
    f = parse_formula(to_text(ast), schema, {"room_color"})
    assert f(p, b) == ref_eval(ast, p, b)


@settings(max_examples=200, deadline=None)
@given(formulas, formulas, states, bindings)
def test_de_morgan(schema, a, b, p, bind):
    lhs = parse_formula(to_text(Not(And((a, b)))), schema, {"room_color"})
    rhs = parse_formula(to_text(Or((Not(a), Not(b)))), schema, {"room_color"})
    assert lhs(p, bind) == rhs(p, bind)


def test_absent_object_same_as_explicit_sentinel(schema, doorkey6, rng):
    """A carried key is off the grid; its predicate must read exactly the sentinel."""
    from mrbt.gridworld.env import predicates

    f = parse_formula("key_pos[yellow] == -1 && door_state[green] == -1", schema)
    s, task = doorkey6.sample_episode(rng)
    carried = s._replace(carried=4, keys=tuple(None for _ in s.keys))
    p = predicates(carried)
    explicit = dict(p, key_pos=list(p["key_pos"]), door_state=list(p["door_state"]))
    explicit["key_pos"][4] = NOWHERE
    explicit["door_state"][1] = -1
    assert f(p, {}) == f(explicit, {}) is True
