"""Testing formulas against demonstrations instead of a symbolic model.

Universal properties are checked on every expert demonstration; the
non-triviality properties need witnesses among random demonstrations.
Replaying the tree over expert demonstrations also yields action-mask priors:
the actions the expert took while each navigation/interaction leaf was active.
"""

from __future__ import annotations

import time

import numpy as np

from ..gridworld.env import ACTIONS, DETERMINISTIC, DynamicsConfig, predicates, step_env
from ..gridworld.spaces import expert_actions
from ..template import build_template, label
from .model import Result, Spec, Trace, VerifyVerdict


def expert_demos(space, n, seed=0, drop_key=False, dynamics: DynamicsConfig = DETERMINISTIC):
    """``n`` scripted expert demonstrations (shortest subgoal plans).

    With ``drop_key`` the expert puts the key down once the door is open.
    """
    rng = np.random.default_rng(seed)
    demos = []
    tries = 0
    while len(demos) < n:
        tries += 1
        if tries > 50 * n:
            raise RuntimeError("could not plan enough expert demonstrations")
        s, task = space.sample_episode(rng)
        acts = expert_actions(space, s, task, drop_key=drop_key)
        if acts is None:
            continue
        states = [s]
        for a in acts:
            states.append(step_env(states[-1], a, dynamics, rng))
        demos.append(Trace(task, states, list(acts), note="expert"))
    return demos


def random_demos(space, n, length, seed=0):
    rng = np.random.default_rng(seed)
    demos = []
    for _ in range(n):
        s, task = space.sample_episode(rng)
        acts = [int(a) for a in rng.integers(len(ACTIONS), size=length - 1)]
        states = [s]
        for a in acts:
            states.append(step_env(states[-1], a))
        demos.append(Trace(task, states, acts, note="random"))
    return demos


def _truth(f, demo):
    b = demo.task.bindings
    return np.array([bool(f.compiled(predicates(s), b)) for s in demo.states])


def _goal(demo):
    return np.array([demo.task.complete(predicates(s)) for s in demo.states])


def _verdict(spec, idx, failures, demos, t0, f_text, formulas, min_fail_note=""):
    if failures:
        first_demo, step, note = failures[0]
        tr = Trace(first_demo.task, first_demo.states, first_demo.actions, note=note, flip_step=step)
        return VerifyVerdict(spec, idx, Result.COUNTEREXAMPLE, trace=tr, wall_time_secs=time.monotonic() - t0,
                             message=f"violated on {len(failures)} of {len(demos)} demonstrations; {note}",
                             formula=f_text, violations=len(failures), formulas=tuple(formulas))
    return VerifyVerdict(spec, idx, Result.HOLDS, wall_time_secs=time.monotonic() - t0, formula=f_text,
                         formulas=tuple(formulas))


def test_with_demonstrations(subtasks, expert: list, random: list, n: int = 10, min_witnesses: int = 1) -> list:
    """Demonstration-based counterpart of the bounded checks.

    Expert demonstrations must all satisfy completion correctness, proximity
    correctness and persistence; non-triviality needs ``min_witnesses``
    of the first ``n`` random demonstrations where the formula never holds.
    """
    if len(random) < n:
        raise ValueError(f"need at least {n} random demonstrations, got {len(random)}")
    random = random[:n]
    out = []
    goals = [_goal(d) for d in expert]
    for i, st in enumerate(subtasks, start=1):
        t0 = time.monotonic()
        fails = []
        for d, g in zip(expert, goals):
            p = _truth(st.psi, d)
            if g[-1] and not p.any():
                fails.append((d, None, f"psi{i} never held on a goal-reaching demonstration"))
        out.append(_verdict(Spec.COMPLETION_CORRECTNESS, i, fails, expert, t0, st.psi.text, [st.psi]))

        for spec, f, fid in ((Spec.COMPLETION_NON_TRIVIALITY, st.psi, f"psi{i}"),
                             (Spec.PROXIMITY_NON_TRIVIALITY, st.phi, f"phi{i}")):
            t0 = time.monotonic()
            wit = [d for d in random if not _truth(f, d).any()]
            if len(wit) >= min_witnesses:
                out.append(VerifyVerdict(spec, i, Result.WITNESSES, witnesses=wit, formula=f.text,
                                         wall_time_secs=time.monotonic() - t0, formulas=(f,)))
            else:
                d = random[0]
                out.append(VerifyVerdict(
                    spec, i, Result.COUNTEREXAMPLE, trace=Trace(d.task, d.states, d.actions, note=f"{fid} holds"),
                    wall_time_secs=time.monotonic() - t0, formula=f.text, violations=len(random) - len(wit),
                    message=f"{fid} held at some step on all {len(random)} random demonstrations",
                    formulas=(f,)))

        t0 = time.monotonic()
        fails = []
        for d in expert:
            p, q = _truth(st.psi, d), _truth(st.phi, d)
            flips = np.nonzero(~p[:-1] & p[1:] & ~q[:-1])[0]
            if flips.size:
                t = int(flips[0])
                fails.append((d, t, f"psi{i} switched on at step {t + 1} while phi{i} was false at step {t}"))
        out.append(_verdict(Spec.PROXIMITY_CORRECTNESS, i, fails, expert, t0, f"{st.psi.text} ; {st.phi.text}",
                            [st.psi, st.phi]))

    # persistence: every completed subtask stays completed on every expert demo
    t0 = time.monotonic()
    psis = [st.psi for st in subtasks]
    fails = []
    first_sub = None
    for d in expert:
        bad = None
        for j, f in enumerate(psis, start=1):
            p = _truth(f, d)
            reg = np.nonzero(p[:-1] & ~p[1:])[0]
            if reg.size:
                bad = (j, int(reg[0]))
                break
        if bad is not None:
            j, t = bad
            first_sub = j if first_sub is None else min(first_sub, j)
            fails.append((d, t, f"psi{j} switched off between steps {t} and {t + 1}"))
    v = _verdict(Spec.COMPOSITION_PERSISTENCE, first_sub, fails, expert, t0, " ; ".join(f.text for f in psis), psis)
    out.append(v)
    return out


def mine_mask_priors(subtasks, schema, demos: list) -> dict:
    """Actions taken while each navigation/interaction leaf was the active one.

    Returns ``{leaf_id: set of action names}``.
    """
    tree = build_template(subtasks, schema)
    priors: dict = {}
    for d in demos:
        tree.reset()
        for s, a in zip(d.states, d.actions):
            res = tree.tick(label(subtasks, predicates(s), d.task.bindings))
            leaf = res.ticked[-1]
            if leaf.startswith(("nav", "act")):
                priors.setdefault(leaf, set()).add(ACTIONS[a])
    return priors


test_with_demonstrations.__test__ = False  # keep pytest from collecting it when imported
