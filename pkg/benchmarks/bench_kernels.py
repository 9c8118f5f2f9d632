"""Time the compiled kernels against the numpy/pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from mrbt import _kernels_py as py
from mrbt.genpipeline import reference_spec
from mrbt.gridworld.spaces import make_task_space
from mrbt.verifier.graph import TaskGraph
from mrbt.gridworld.env import apply_action

try:
    from mrbt import _kernels as cy
except ImportError:
    cy = None


def tick_loop(mod, n=20_000):
    states = bytearray([0, 2, 2] * 4)
    rw = (1.0, -1.0, 0.1, -0.1)
    seq = np.random.default_rng(0).integers(0, 16, size=(n, 2))
    for psi, phi in seq.tolist():
        mod.template_tick(states, 4, psi, phi, rw)


def greedy_loop(mod, n=20_000):
    q = np.random.default_rng(0).normal(size=7)
    for i in range(n):
        mod.masked_greedy(q, (i % 127) + 1, 0.5)
        mod.masked_max(q, (i % 127) + 1)


def graph_case():
    sp = make_task_space("lockedroom", "mini")
    task = sp.tasks()[0]
    g = TaskGraph(task, sp.initial_states(task), apply_action, 7, 24)
    psis = [s.psi for s in reference_spec(sp).to_subtasks(sp)]
    lab = np.zeros(len(g), dtype=np.int64)
    for j, f in enumerate(psis):
        lab |= g.label(f).astype(np.int64) << j
    ok = np.ones(len(g), dtype=bool)
    return g, ok, lab


def dist_call(mod, g, ok, lab):
    mod.backward_dist(g.succ, g.expanded, ok, g.goal, lab, 0b111, 24)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    g, ok, lab = graph_case()
    cases = [
        ("template_tick x20k", lambda m: tick_loop(m)),
        ("masked_greedy+max x20k", lambda m: greedy_loop(m)),
        (f"backward_dist ({len(g)} states)", lambda m: dist_call(m, g, ok, lab)),
    ]
    print(f"{'kernel':<34}{'python (s)':>12}{'cython (s)':>12}{'speed-up':>10}")
    for name, fn in cases:
        tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat))
        if cy is None:
            print(f"{name:<34}{tp:>12.4f}{'n/a':>12}{'':>10}")
            continue
        tc = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat))
        print(f"{name:<34}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
