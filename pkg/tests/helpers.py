"""Shared builders for tests."""

import itertools

from mrbt.formula import TRUE
from mrbt.mbrm import Status
from mrbt.template import SubtaskSpec, build_template

NAV = 0b0000111  # left, right, forward
ACT = 0b0111000  # pickup, drop, toggle


def dummy_subtasks(k, nav=NAV, act=ACT):
    return [SubtaskSpec(f"s{i}", TRUE, TRUE, nav, act) for i in range(1, k + 1)]


def template(k, schema, rewards=None):
    return build_template(dummy_subtasks(k), schema, rewards)


def reachable_assignments(tree):
    """Every combination of per-leaf reachable states."""
    per_leaf = [lf.machine.states() for lf in tree.leaves]
    return list(itertools.product(*per_leaf))


def all_labels(tree):
    ids = sorted(tree.formulas)
    for bits in range(1 << len(ids)):
        yield frozenset(i for n, i in enumerate(ids) if bits >> n & 1)


S, R, F = Status.SUCCESS, Status.RUNNING, Status.FAILURE
