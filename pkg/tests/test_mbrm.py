import pytest
from hypothesis import given, strategies as st

from mrbt.mbrm import INITIAL_STATE, Kind, Mbrm, Status, step

S, R, F = Status.SUCCESS, Status.RUNNING, Status.FAILURE


def cond():
    return Mbrm(Kind.CONDITION, "psi1", 0b1111111)


def nav():
    return Mbrm(Kind.NAVIGATION, "phi1", 0b111, 0.1, -0.1)


@pytest.mark.parametrize("u,sigma,expect", [
    (F, {"psi1"}, (S, 1.0)),
    (S, set(), (F, -1.0)),
    (S, {"psi1"}, (S, 0.0)),
    (F, set(), (F, 0.0)),
])
def test_condition_table(u, sigma, expect):
    assert step(cond(), u, sigma) == expect


@pytest.mark.parametrize("u,sigma,expect", [
    (R, {"phi1"}, (S, 0.1)),
    (S, set(), (R, -0.1)),
    (S, {"phi1"}, (S, 0.0)),
    (R, set(), (R, 0.0)),
])
def test_navigation_table(u, sigma, expect):
    assert step(nav(), u, sigma) == expect


def test_interaction_always_running():
    m = Mbrm(Kind.INTERACTION, None, 0b111000)
    assert step(m, R, {"psi1", "phi1"}) == (R, 0.0)
    assert m.u0 is R


def test_initial_states():
    assert INITIAL_STATE == {Kind.CONDITION: F, Kind.NAVIGATION: R, Kind.INTERACTION: R}


@pytest.mark.parametrize("kwargs", [
    dict(kind=Kind.CONDITION, rho="psi1", mask=0),
    dict(kind=Kind.INTERACTION, rho="psi1", mask=1),
    dict(kind=Kind.NAVIGATION, rho=None, mask=1),
])
def test_invalid_machines(kwargs):
    with pytest.raises(ValueError):
        Mbrm(**kwargs)


@given(st.sampled_from(list(Kind)), st.lists(st.booleans(), max_size=30))
def test_kind_ranges(kind, truths):
    """Condition never Running, navigation never Failure, interaction always Running;
    rewards only appear on a change of state."""
    m = Mbrm(kind, None if kind is Kind.INTERACTION else "x", 1)
    u = m.u0
    for t in truths:
        new, r = step(m, u, {"x"} if t else set())
        assert new in m.states()
        if new == u:
            assert r == 0.0
        u = new
