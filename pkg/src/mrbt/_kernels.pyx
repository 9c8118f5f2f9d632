# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.  ``_kernels_py`` is the reference fallback."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

cdef enum:
    FAILURE = 0
    SUCCESS = 1
    RUNNING = 2


def template_tick(unsigned char[:] states, int k, long long psi_bits, long long phi_bits, rewards):
    cdef double cond_t = rewards[0], cond_f = rewards[1], nav_t = rewards[2], nav_f = rewards[3]
    cdef double reward = 0.0
    cdef int n = 0, i, c
    cdef unsigned char old, new
    for i in range(k):
        c = 3 * i
        old = states[c]
        if (psi_bits >> i) & 1:
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
        if (phi_bits >> i) & 1:
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


def masked_greedy(double[:] q, long long mask, double tie_u):
    cdef Py_ssize_t a, na = q.shape[0]
    cdef double best = -INFINITY
    cdef int count = 0, pick
    for a in range(na):
        if (mask >> a) & 1:
            if q[a] > best:
                best = q[a]
                count = 1
            elif q[a] == best:
                count += 1
    if count == 0:
        return -1
    pick = <int>(tie_u * count)
    for a in range(na):
        if (mask >> a) & 1 and q[a] == best:
            if pick == 0:
                return a
            pick -= 1
    return -1


def masked_max(double[:] q, long long mask):
    cdef Py_ssize_t a
    cdef double best = -INFINITY
    for a in range(q.shape[0]):
        if (mask >> a) & 1 and q[a] > best:
            best = q[a]
    return best


def backward_dist(succ, expanded, node_ok, target, lab, long long mono, int max_depth):
    cdef int[:, :] S = np.ascontiguousarray(succ, dtype=np.int32)
    cdef unsigned char[:] E = np.ascontiguousarray(expanded, dtype=np.uint8)
    cdef unsigned char[:] OK = np.ascontiguousarray(node_ok, dtype=np.uint8)
    cdef unsigned char[:] T = np.ascontiguousarray(target, dtype=np.uint8)
    cdef long long[:] L = np.ascontiguousarray(lab, dtype=np.int64)
    cdef Py_ssize_t n = S.shape[0], na = S.shape[1], u, a
    cdef int v, d
    cdef bint changed
    out = np.full(n, -1, dtype=np.int32)
    cdef int[:] dist = out
    with nogil:
        for u in range(n):
            if T[u] and OK[u]:
                dist[u] = 0
        for d in range(1, max_depth + 1):
            changed = False
            for u in range(n):
                if dist[u] != -1 or not OK[u] or not E[u]:
                    continue
                for a in range(na):
                    v = S[u, a]
                    if dist[v] == d - 1 and (L[u] & ~L[v] & mono) == 0:
                        dist[u] = d
                        changed = True
                        break
            if not changed:
                break
    return out
