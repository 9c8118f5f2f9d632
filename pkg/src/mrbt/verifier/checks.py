"""Bounded checks of subtask formulas over horizon-H trajectories.

Every check explores the reachable graph of each task (depth H-1 from the
task's initial states) and answers its question with a backward layered
search.  Traces shorter than H are padded with the no-op ``done`` action.
"""

from __future__ import annotations

import time

import numpy as np

from ..formula import Formula
from ..gridworld.env import DETERMINISTIC, predicates, step_env
from .graph import GraphCache, TaskGraph
from .model import Result, Spec, SymbolicModel, Trace, VerifyConfig, VerifyVerdict

GOAL_ID = "goal"


class _Run:
    def __init__(self, model: SymbolicModel, space, cfg: VerifyConfig):
        self.model = model
        self.space = space
        self.cfg = cfg
        self.t0 = time.monotonic()
        self.deadline = self.t0 + cfg.timeout_secs
        self.timed_out = False
        self.incomplete = False
        cache = model.cache.get("graphs")
        if cache is None or cache.budget != cfg.cache_states:
            cache = model.cache["graphs"] = GraphCache(cfg.cache_states)
        self.cache = cache

    @property
    def elapsed(self):
        return time.monotonic() - self.t0

    def graphs(self):
        for idx, task in enumerate(self.space.tasks()):
            if time.monotonic() > self.deadline:
                self.timed_out = self.incomplete = True
                return
            g = self._graph(idx, task)
            if not g.complete:
                self.incomplete = True
            yield g

    def _graph(self, idx, task):
        cfg, sp = self.cfg, self.space
        depth = cfg.horizon - 1
        key = (sp.name, sp.size, task, depth, None if sp.enumerable else (cfg.samples, cfg.seed))
        g = self.cache.get(key)
        if g is not None:
            return g
        if sp.enumerable:
            inits = sp.initial_states(task)
        else:
            rng = np.random.default_rng((cfg.seed, idx))
            inits = sp.initial_states(task, rng=rng, limit=cfg.samples)
        g = TaskGraph(task, inits, self.model.successor, self.model.n_actions, depth,
                      max_states=cfg.max_states, deadline=self.deadline, sampled=not sp.enumerable)
        if g.truncated and time.monotonic() > self.deadline:
            self.timed_out = True
        self.cache.put(key, g)
        return g

    def verdict(self, spec, idx, result, formulas, **kw):
        return VerifyVerdict(spec, idx, result, wall_time_secs=self.elapsed,
                             formula=" ; ".join(f.text for f in formulas), formulas=tuple(formulas), **kw)

    def inconclusive_message(self):
        if self.timed_out:
            return f"timed out after {self.cfg.timeout_secs:g}s without a counterexample"
        if not self.space.enumerable:
            return "initial states were sampled; no counterexample among the explored trajectories"
        return "state budget exhausted without a counterexample"


def _trace(g: TaskGraph, nodes, horizon, named, flip_step=None, note=""):
    states, actions = g.to_states(nodes, horizon)
    nodes = list(nodes) + [nodes[-1]] * (horizon - len(nodes))
    labels = []
    for u in nodes:
        ids = {fid for fid, f in named.items() if g.label(f)[u]}
        if g.goal[u]:
            ids.add(GOAL_ID)
        labels.append(frozenset(ids))
    return Trace(g.task, states, actions, labels, note=note, flip_step=flip_step)


def _name(f, default):
    return {default: f}


# ------------------------------------------------------------------ checks

def check_completion_correctness(psi: Formula, model: SymbolicModel, space, cfg: VerifyConfig,
                                 subtask_index: int | None = None) -> VerifyVerdict:
    """Is there a trajectory ending in the goal along which ``psi`` never held?"""
    run = _Run(model, space, cfg)
    H = cfg.horizon
    fid = f"psi{subtask_index or ''}"
    for g in run.graphs():
        ok = ~g.label(psi)
        dist = g.dist(ok, g.goal & ok, max_depth=H - 1)
        d0 = dist[g.inits]
        hit = np.nonzero(d0 >= 0)[0]
        if hit.size:
            start = g.inits[hit[np.argmin(d0[hit])]]
            nodes = g.path(start, dist)
            tr = _trace(g, nodes, H, _name(psi, fid),
                        note=f"goal reached at step {len(nodes) - 1} while {fid} never held")
            return run.verdict(Spec.COMPLETION_CORRECTNESS, subtask_index, Result.COUNTEREXAMPLE, [psi],
                               trace=tr, message=tr.note)
    if run.incomplete:
        return run.verdict(Spec.COMPLETION_CORRECTNESS, subtask_index, Result.INCONCLUSIVE, [psi],
                           message=run.inconclusive_message())
    return run.verdict(Spec.COMPLETION_CORRECTNESS, subtask_index, Result.HOLDS, [psi])


def check_non_triviality(f: Formula, model: SymbolicModel, space, cfg: VerifyConfig,
                         subtask_index: int | None = None, spec: Spec = Spec.COMPLETION_NON_TRIVIALITY,
                         fid: str | None = None) -> VerifyVerdict:
    """Find N trajectories with pairwise-distinct initial states where ``f`` never holds.

    Since ``done`` is a no-op, a trajectory that idles from an initial state
    where ``f`` is false is a witness, so the search reduces to the initial
    states.
    """
    run = _Run(model, space, cfg)
    H = cfg.horizon
    fid = fid or f"f{subtask_index or ''}"
    named = _name(f, fid)
    seen = set()
    witnesses = []
    bad = None
    for g in run.graphs():
        lab = g.label(f)
        for u in g.inits:
            s = g.states[u]
            if lab[u]:
                if bad is None:
                    bad = (g, u)
                continue
            if s in seen:
                continue
            seen.add(s)
            witnesses.append(_trace(g, [u], H, named, note="idles from an initial state where the formula is false"))
            if len(witnesses) >= cfg.n_distinct:
                return run.verdict(spec, subtask_index, Result.WITNESSES, [f], witnesses=witnesses)
    if run.incomplete:
        return run.verdict(spec, subtask_index, Result.INCONCLUSIVE, [f], witnesses=witnesses,
                           message=f"only {len(witnesses)} of {cfg.n_distinct} witnesses found; "
                                   + run.inconclusive_message())
    msg = (f"{fid} already holds in every initial state but {len(witnesses)}; "
           f"{cfg.n_distinct} distinct initial states where it is false are required")
    tr = _trace(bad[0], [bad[1]], H, named, note=f"{fid} holds at step 0") if bad is not None else None
    return run.verdict(spec, subtask_index, Result.COUNTEREXAMPLE, [f], trace=tr, witnesses=witnesses,
                       message=msg)


def check_object_proximity_correctness(psi: Formula, phi: Formula, model: SymbolicModel, space,
                                       cfg: VerifyConfig, subtask_index: int | None = None) -> VerifyVerdict:
    """Is there a step where ``psi`` switches on while ``phi`` was false just before?"""
    run = _Run(model, space, cfg)
    H = cfg.horizon
    i = subtask_index or ""
    named = {f"psi{i}": psi, f"phi{i}": phi}
    for g in run.graphs():
        p, q = g.label(psi), g.label(phi)
        flip = g.expanded.astype(bool) & ~p & ~q & p[g.succ].any(axis=1)
        if not flip.any():
            continue
        dist = g.dist(np.ones(len(g), dtype=bool), flip, max_depth=H - 2)
        d0 = dist[g.inits]
        hit = np.nonzero(d0 >= 0)[0]
        if hit.size:
            start = g.inits[hit[np.argmin(d0[hit])]]
            nodes = g.path(start, dist)
            u = nodes[-1]
            v = next(int(v) for v in g.succ[u] if p[v])
            nodes.append(v)
            t = len(nodes) - 2
            tr = _trace(g, nodes, H, named, flip_step=t,
                        note=f"psi{i} switched on between steps {t} and {t + 1} while phi{i} was false at step {t}")
            return run.verdict(Spec.PROXIMITY_CORRECTNESS, subtask_index, Result.COUNTEREXAMPLE, [psi, phi],
                               trace=tr, message=tr.note)
    if run.incomplete:
        return run.verdict(Spec.PROXIMITY_CORRECTNESS, subtask_index, Result.INCONCLUSIVE, [psi, phi],
                           message=run.inconclusive_message())
    return run.verdict(Spec.PROXIMITY_CORRECTNESS, subtask_index, Result.HOLDS, [psi, phi])


def persistence_by_subtask(psis: list, model: SymbolicModel, space, cfg: VerifyConfig) -> list:
    """Persistence verdict for every prefix psi^1..psi^j, j = 1..k.

    A witness is a goal-reaching trajectory along which none of the prefix
    formulas switches off once on.  Witness sets shrink as j grows, so the
    first failing prefix pins the first subtask that breaks persistence.
    """
    if not model.exact:
        raise ValueError("persistence is only checked against deterministic (exact) models")
    run = _Run(model, space, cfg)
    H = cfg.horizon
    k = len(psis)
    named = {f"psi{j + 1}": f for j, f in enumerate(psis)}
    found = [[] for _ in range(k + 1)]  # found[j]: witnesses for the first j formulas
    seen = [set() for _ in range(k + 1)]
    cand = [None] * (k + 1)  # an init reaching the goal under prefix j-1 but not j
    first_graph = None
    for g in run.graphs():
        first_graph = first_graph or g
        lab = np.zeros(len(g), dtype=np.int64)
        for j, f in enumerate(psis):
            lab |= g.label(f).astype(np.int64) << j
        ones = np.ones(len(g), dtype=bool)
        prev = None
        for j in range(k + 1):
            mono = (1 << j) - 1
            dist = g.dist(ones, g.goal, lab, mono, max_depth=H - 1)
            d0 = dist[g.inits]
            for pos, u in enumerate(g.inits):
                if d0[pos] < 0:
                    if j > 0 and cand[j] is None and prev[pos] >= 0:
                        cand[j] = (g, int(u), (1 << (j - 1)) - 1)
                    continue
                s = g.states[u]
                if len(found[j]) < cfg.n_distinct and s not in seen[j]:
                    seen[j].add(s)
                    found[j].append((g, int(u), dist, lab, mono))
            prev = d0
        if len(found[k]) >= cfg.n_distinct:
            break

    verdicts = []
    first_fail = None
    blocked = False
    for j in range(1, k + 1):
        prefix = psis[:j]
        if first_fail is None and not blocked and len(found[j]) >= cfg.n_distinct:
            wit = []
            for g, u, dist, lab, mono in found[j][: cfg.n_distinct]:
                nodes = g.path(u, dist, lab, mono)
                wit.append(_trace(g, nodes, H, named, note="goal reached with every completed subtask kept"))
            verdicts.append(run.verdict(Spec.COMPOSITION_PERSISTENCE, j, Result.WITNESSES, prefix, witnesses=wit))
        elif first_fail is not None:
            verdicts.append(run.verdict(Spec.COMPOSITION_PERSISTENCE, j, Result.COUNTEREXAMPLE, prefix,
                                        trace=verdicts[first_fail - 1].trace,
                                        message=f"implied by the failure at subtask {first_fail}"))
        elif blocked:
            verdicts.append(run.verdict(Spec.COMPOSITION_PERSISTENCE, j, Result.INCONCLUSIVE, prefix,
                                        message="an earlier prefix was inconclusive"))
        elif run.incomplete:
            blocked = True
            verdicts.append(run.verdict(
                Spec.COMPOSITION_PERSISTENCE, j, Result.INCONCLUSIVE, prefix,
                message=f"only {len(found[j])} of {cfg.n_distinct} witnesses for subtasks 1..{j}; "
                        + run.inconclusive_message()))
        else:
            first_fail = j
            tr = _persistence_trace(j, cand[j], psis, named, H)
            if tr is None and first_graph is not None:
                tr = _trace(first_graph, [int(first_graph.inits[0])], H, named,
                            note="the goal is not reachable within the horizon from enough initial states")
            msg = (f"fewer than {cfg.n_distinct} goal-reaching trajectories keep psi{j} true once it holds "
                   f"({len(found[j])} found); " + (tr.note if tr else ""))
            verdicts.append(run.verdict(Spec.COMPOSITION_PERSISTENCE, j, Result.COUNTEREXAMPLE, prefix,
                                        trace=tr, message=msg))
    return verdicts


def _persistence_trace(j, cand, psis, named, H):
    if cand is not None:
        g, u, mono = cand
        lab = np.zeros(len(g), dtype=np.int64)
        for i, f in enumerate(psis):
            lab |= g.label(f).astype(np.int64) << i
        dist = g.dist(np.ones(len(g), dtype=bool), g.goal, lab, mono, max_depth=H - 1)
        nodes = g.path(u, dist, lab, mono)
        pj = g.label(psis[j - 1])
        t = next(t for t in range(len(nodes) - 1) if pj[nodes[t]] and not pj[nodes[t + 1]])
        return _trace(g, nodes, H, named, flip_step=t,
                      note=f"psi{j} switched off between steps {t} and {t + 1} on the way to the goal")
    return None


def check_composition_persistence(psis: list, model: SymbolicModel, space, cfg: VerifyConfig) -> VerifyVerdict:
    """Single verdict: the first violating subtask, or witnesses for all of them."""
    vs = persistence_by_subtask(psis, model, space, cfg)
    for v in vs:
        if not v.passed:
            return v
    last = vs[-1]
    last.subtask_index = None
    return last


def verify_all(subtasks, model: SymbolicModel, space, cfg: VerifyConfig) -> list:
    """All checks for a list of SubtaskSpec: four rows per subtask plus one
    persistence row per subtask prefix."""
    formulas = [f for st in subtasks for f in (st.psi, st.phi)]
    run = _Run(model, space, cfg)
    for g in run.graphs():  # one predicate pass per graph for every formula
        g.ensure_labels(formulas)
    out = []
    for i, st in enumerate(subtasks, start=1):
        out.append(check_completion_correctness(st.psi, model, space, cfg, i))
        out.append(check_non_triviality(st.psi, model, space, cfg, i, Spec.COMPLETION_NON_TRIVIALITY, f"psi{i}"))
        out.append(check_object_proximity_correctness(st.psi, st.phi, model, space, cfg, i))
        out.append(check_non_triviality(st.phi, model, space, cfg, i, Spec.PROXIMITY_NON_TRIVIALITY, f"phi{i}"))
    out.extend(persistence_by_subtask([st.psi for st in subtasks], model, space, cfg))
    out.sort(key=lambda v: (v.subtask_index or 0, list(Spec).index(v.spec)))
    return out


# ------------------------------------------------------------------ replay

def replay_violation(verdict: VerifyVerdict) -> bool:
    """Re-run a failure trace through the concrete deterministic environment
    and confirm it exhibits the reported violation."""
    tr = verdict.trace
    if tr is None:
        return False
    s = tr.states[0]
    for a, nxt in zip(tr.actions, tr.states[1:]):
        s = step_env(s, a, DETERMINISTIC)
        if s != nxt:
            return False
    task = tr.task
    preds = [predicates(x) for x in tr.states]
    fs = verdict.formulas

    def holds(f, t):
        return bool(f.compiled(preds[t], task.bindings))

    H = len(tr.states)
    spec = verdict.spec
    if spec is Spec.COMPLETION_CORRECTNESS:
        return task.complete(preds[-1]) and not any(holds(fs[0], t) for t in range(H))
    if spec in (Spec.COMPLETION_NON_TRIVIALITY, Spec.PROXIMITY_NON_TRIVIALITY):
        return holds(fs[0], 0)
    if spec is Spec.PROXIMITY_CORRECTNESS:
        t = tr.flip_step
        psi, phi = fs
        return not holds(psi, t) and holds(psi, t + 1) and not holds(phi, t)
    if spec is Spec.COMPOSITION_PERSISTENCE:
        t = tr.flip_step
        if t is None:
            return False
        # the regressing formula may belong to an earlier prefix (implied rows)
        return task.complete(preds[-1]) and any(holds(f, t) and not holds(f, t + 1) for f in fs)
    return False
