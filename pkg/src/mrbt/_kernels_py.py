"""Pure-Python/numpy versions of the hot kernels in ``_kernels.pyx``.

Signatures and results must match the compiled module exactly.
"""

from __future__ import annotations

import numpy as np

FAILURE, SUCCESS, RUNNING = 0, 1, 2


def template_tick(states, k, psi_bits, phi_bits, rewards):
    """Tick a flat template tree in place.

    ``states`` holds 3k leaf states laid out as (condition, navigation,
    interaction) per subtask.  Returns ``(reward, last_leaf, n_ticked,
    root_status)``.
    """
    cond_t, cond_f, nav_t, nav_f = rewards
    reward = 0.0
    n = 0
    for i in range(k):
        c = 3 * i
        old = states[c]
        if psi_bits >> i & 1:
            new = SUCCESS
            if old != SUCCESS:
                reward += cond_t
        else:
            new = FAILURE
            if old == SUCCESS:
                reward += cond_f
        states[c] = new
        n += 1
        if new == SUCCESS:
            continue
        old = states[c + 1]
        if phi_bits >> i & 1:
            new = SUCCESS
            if old != SUCCESS:
                reward += nav_t
        else:
            new = RUNNING
            if old == SUCCESS:
                reward += nav_f
        states[c + 1] = new
        n += 1
        if new == RUNNING:
            return reward, c + 1, n, RUNNING
        states[c + 2] = RUNNING
        n += 1
        return reward, c + 2, n, RUNNING
    return reward, 3 * (k - 1), n, SUCCESS


def masked_greedy(q, mask, tie_u):
    """Argmax of ``q`` over actions in ``mask``; ties broken by ``tie_u`` in [0, 1)."""
    best = -np.inf
    count = 0
    for a in range(len(q)):
        if mask >> a & 1:
            v = q[a]
            if v > best:
                best = v
                count = 1
            elif v == best:
                count += 1
    if count == 0:
        return -1
    pick = int(tie_u * count)
    for a in range(len(q)):
        if mask >> a & 1 and q[a] == best:
            if pick == 0:
                return a
            pick -= 1
    return -1


def masked_max(q, mask):
    best = -np.inf
    for a in range(len(q)):
        if mask >> a & 1 and q[a] > best:
            best = q[a]
    return float(best)


def backward_dist(succ, expanded, node_ok, target, lab, mono, max_depth):
    """Fewest steps from each node to a target, inside a constrained subgraph.

    Paths may only visit nodes with ``node_ok``; an edge u->v is usable only if
    u was expanded and ``lab[u] & ~lab[v] & mono == 0`` (bits in ``mono`` never
    switch off).  Returns -1 where no target is reachable within ``max_depth``.
    """
    succ = np.asarray(succ)
    n, n_act = succ.shape
    ok = np.asarray(node_ok, dtype=bool)
    lab = np.asarray(lab, dtype=np.int64)
    dist = np.full(n, -1, dtype=np.int32)
    dist[np.asarray(target, dtype=bool) & ok] = 0
    active = ok & np.asarray(expanded, dtype=bool)
    if mono:
        edge_ok = (lab[:, None] & ~lab[succ] & np.int64(mono)) == 0
    else:
        edge_ok = np.ones(succ.shape, dtype=bool)
    for d in range(1, max_depth + 1):
        cand = active & (dist == -1)
        if not cand.any():
            break
        hit = ((dist[succ] == d - 1) & edge_ok).any(axis=1) & cand
        if not hit.any():
            break
        dist[hit] = d
    return dist
