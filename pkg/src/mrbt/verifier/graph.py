"""Explicit-state exploration of one task's bounded reachable graph."""

from __future__ import annotations

import time
from collections import OrderedDict

import numpy as np

from ..gridworld.env import DONE, predicates
from ..kernels import backward_dist


class TaskGraph:
    """States reachable in at most ``depth`` steps from the task's initial states.

    ``succ[u, a]`` is the successor index; rows of unexpanded nodes (the last
    layer, or anything cut off by a budget) point back at ``u`` and carry
    ``expanded[u] == 0`` so searches never step through them.
    """

    def __init__(self, task, inits, successor, n_actions, depth, max_states=None, deadline=None, sampled=False):
        self.task = task
        self.depth = depth
        self.sampled = sampled
        self.truncated = False
        states, index = [], {}
        init_idx = []
        for s in inits:
            i = index.get(s)
            if i is None:
                i = index[s] = len(states)
                states.append(s)
                init_idx.append(i)
        rows = {}
        frontier = list(init_idx)
        for _ in range(depth):
            nxt = []
            for n_done, u in enumerate(frontier):
                if (max_states is not None and len(states) >= max_states) or (
                    deadline is not None and n_done % 512 == 0 and time.monotonic() > deadline
                ):
                    self.truncated = True
                    break
                s = states[u]
                row = []
                for a in range(n_actions):
                    v = successor(s, a)
                    j = index.get(v)
                    if j is None:
                        j = index[v] = len(states)
                        states.append(v)
                        nxt.append(j)
                    row.append(j)
                rows[u] = row
            if self.truncated:
                break
            frontier = nxt
        n = len(states)
        succ = np.repeat(np.arange(n, dtype=np.int32)[:, None], n_actions, axis=1)
        expanded = np.zeros(n, dtype=np.uint8)
        for u, row in rows.items():
            succ[u] = row
            expanded[u] = 1
        self.states = states
        self.index = index
        self.succ = succ
        self.expanded = expanded
        self.inits = np.asarray(init_idx, dtype=np.int64)
        self._labels = {}
        self._goal = None

    def __len__(self):
        return len(self.states)

    @property
    def complete(self) -> bool:
        """True when the graph is exhaustive for the task's initial-state set."""
        return not (self.truncated or self.sampled)

    def ensure_labels(self, formulas) -> None:
        todo = [f for f in formulas if f.ast not in self._labels]
        need_goal = self._goal is None
        if not todo and not need_goal:
            return
        n = len(self.states)
        cols = [np.zeros(n, dtype=bool) for _ in todo]
        fns = [f.compiled for f in todo]
        goal = np.zeros(n, dtype=bool) if need_goal else None
        b = self.task.bindings
        for i, s in enumerate(self.states):
            p = predicates(s)
            for col, fn in zip(cols, fns):
                if fn(p, b):
                    col[i] = True
            if need_goal and self.task.complete(p):
                goal[i] = True
        for f, col in zip(todo, cols):
            self._labels[f.ast] = col
        if need_goal:
            self._goal = goal

    def label(self, f) -> np.ndarray:
        self.ensure_labels([f])
        return self._labels[f.ast]

    @property
    def goal(self) -> np.ndarray:
        self.ensure_labels([])
        return self._goal

    def dist(self, node_ok, target, lab=None, mono=0, max_depth=None) -> np.ndarray:
        n = len(self.states)
        if lab is None:
            lab = np.zeros(n, dtype=np.int64)
        return backward_dist(self.succ, self.expanded, node_ok.astype(np.uint8), target.astype(np.uint8),
                             lab, int(mono), int(self.depth if max_depth is None else max_depth))

    def path(self, start, dist, lab=None, mono=0) -> list:
        """Node path from ``start`` down a ``dist`` gradient to a target."""
        path = [int(start)]
        u = int(start)
        while dist[u] > 0:
            d = dist[u]
            for a in range(self.succ.shape[1]):
                v = int(self.succ[u, a])
                if dist[v] == d - 1 and (lab is None or (int(lab[u]) & ~int(lab[v]) & mono) == 0):
                    path.append(v)
                    u = v
                    break
            else:  # pragma: no cover - dist arrays always have a descending neighbour
                raise RuntimeError("broken distance gradient")
        return path

    def action_between(self, u, v) -> int:
        row = self.succ[u]
        for a in range(len(row)):
            if row[a] == v:
                return a
        raise ValueError("no edge between nodes")

    def to_states(self, nodes, horizon):
        """States and actions for a node path, padded with ``done`` to ``horizon``."""
        states = [self.states[u] for u in nodes]
        actions = [self.action_between(u, v) for u, v in zip(nodes, nodes[1:])]
        while len(states) < horizon:
            states.append(states[-1])
            actions.append(DONE)
        return states, actions


class GraphCache:
    """LRU of explored graphs bounded by the total number of stored states."""

    def __init__(self, budget):
        self.budget = budget
        self._d = OrderedDict()
        self._size = 0

    def get(self, key):
        g = self._d.get(key)
        if g is not None:
            self._d.move_to_end(key)
        return g

    def put(self, key, g):
        if len(g) > self.budget or g.truncated:
            return
        self._d[key] = g
        self._size += len(g)
        while self._size > self.budget:
            _, old = self._d.popitem(last=False)
            self._size -= len(old)
