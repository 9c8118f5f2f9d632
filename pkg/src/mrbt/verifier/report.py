"""Verdict tables and counterexample trace files."""

from __future__ import annotations

import json
from pathlib import Path

from ..formula import COLORS
from ..gridworld.env import ACTIONS, predicates
from .model import Trace, VerifyVerdict


def _jsonable(v):
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def task_record(task) -> dict:
    return {"text": task.text, "bindings": {k: COLORS[v] for k, v in task.bindings.items()}}


def trace_records(tr: Trace) -> list:
    """One dict per step: predicates, label assignment and the action taken."""
    out = []
    for t, s in enumerate(tr.states):
        rec = {"t": t}
        rec["predicates"] = {k: _jsonable(v) for k, v in predicates(s).items()}
        if tr.labels:
            rec["labels"] = sorted(tr.labels[t])
        rec["action"] = ACTIONS[tr.actions[t]] if t < len(tr.actions) else None
        out.append(rec)
    return out


def format_trace(tr: Trace, max_steps: int | None = None) -> str:
    lines = [f"task: {tr.task.text}"]
    if tr.note:
        lines.append(f"note: {tr.note}")
    if tr.flip_step is not None:
        lines.append(f"violation step: {tr.flip_step}")
    recs = trace_records(tr)
    if max_steps is not None:
        recs = recs[:max_steps]
    for r in recs:
        lines.append(json.dumps(r, separators=(", ", ": ")))
    return "\n".join(lines)


def write_trace(path, verdict: VerifyVerdict) -> Path:
    """Counterexample file: a JSON header line, then one JSON record per step."""
    path = Path(path)
    tr = verdict.trace
    header = {
        "spec": verdict.spec.value,
        "subtask": verdict.subtask_index,
        "result": verdict.result.value,
        "formula": verdict.formula,
        "message": verdict.message,
        "task": task_record(tr.task),
        "flip_step": tr.flip_step,
        "note": tr.note,
    }
    with path.open("w") as fh:
        fh.write(json.dumps(header) + "\n")
        for rec in trace_records(tr):
            fh.write(json.dumps(rec) + "\n")
    return path


def read_trace_file(path) -> tuple[dict, list]:
    lines = Path(path).read_text().splitlines()
    return json.loads(lines[0]), [json.loads(x) for x in lines[1:]]


def verdict_table(verdicts) -> str:
    rows = [("Specification", "Subtask", "Result", "Time (s)")]
    for v in verdicts:
        rows.append((v.spec.value, "-" if v.subtask_index is None else str(v.subtask_index),
                     v.result.value, f"{v.wall_time_secs:.2f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    sep = "-+-".join("-" * w for w in widths)
    out = []
    for n, r in enumerate(rows):
        out.append(" | ".join(c.ljust(w) for c, w in zip(r, widths)))
        if n == 0:
            out.append(sep)
    return "\n".join(out)
