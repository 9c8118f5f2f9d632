"""Generate -> verify -> refine loop."""

from __future__ import annotations

import logging
import string
from dataclasses import dataclass, field
from importlib import resources

import yaml

from ..formula import COLORS, FormulaError
from ..template import RewardConfig
from ..verifier import Spec, SymbolicModel, VerifyConfig, verify_all
from ..verifier.report import format_trace
from .generators import Expected, GeneratorRequest, extract_block
from .specfile import MrbtSpecFile, SubtaskEntry

log = logging.getLogger(__name__)


def load_prompt(name: str) -> string.Template:
    text = resources.files("mrbt.genpipeline").joinpath(f"prompts/{name}.txt").read_text()
    return string.Template(text)


def system_prompt(space) -> str:
    preds = []
    for p in space.schema.predicates:
        kind = "(x, y)" if p.kind == "coord2" else "integer"
        idx = "[colour]" if p.colored else ""
        preds.append(f"  {p.name}{idx}: {kind}")
    return load_prompt("system").substitute(
        space=space.name,
        template=space.template,
        colors=", ".join(COLORS),
        variables=", ".join(space.variables) or "none",
        goal=" && ".join(space.goal_texts),
        predicates="\n".join(preds),
        actions=", ".join(space.schema.actions),
    )


def build_debug_prompt(verdict, spec_file: MrbtSpecFile) -> str:
    """Prompt asking to revise the formula named by a failed verdict."""
    target = _target_key(verdict)
    idx = int(target[3:])
    entry = spec_file.subtasks[idx - 1]
    formula = entry.psi if target.startswith("psi") else entry.phi
    trace = ""
    if verdict.trace is not None:
        trace = "Counterexample trajectory (one record per step):\n" + format_trace(verdict.trace) + "\n"
    return load_prompt("debug").substitute(
        spec=verdict.spec.value, index=idx, formula=f"{target} = {formula}",
        message=verdict.message or verdict.result.value, trace=trace, target=target,
    )


def _target_key(verdict) -> str:
    i = verdict.subtask_index or 1
    if verdict.spec in (Spec.COMPLETION_CORRECTNESS, Spec.COMPLETION_NON_TRIVIALITY, Spec.COMPOSITION_PERSISTENCE):
        return f"psi{i}"
    return f"phi{i}"


@dataclass
class PipelineResult:
    spec: MrbtSpecFile | None
    verdicts: list
    iterations: int
    verified: bool
    history: list = field(default_factory=list)  # per iteration: short status strings

    def __iter__(self):  # unpack as (spec, verdicts)
        return iter((self.spec, self.verdicts))


class _Session:
    def __init__(self, space, generator):
        self.space = space
        self.gen = generator
        self.system = system_prompt(space)
        self.messages: list = []

    def ask(self, expected: Expected, prompt: str) -> str:
        self.messages.append({"role": "user", "content": prompt})
        req = GeneratorRequest(self.system, list(self.messages), expected)
        text = self.gen.complete(req)
        self.messages.append({"role": "assistant", "content": text})
        return text

    def parse(self, expected: Expected, text: str):
        body = extract_block(text)
        if expected.kind == "subtasks":
            names = yaml.safe_load(body)
            if not isinstance(names, list) or not names or not all(isinstance(n, str) for n in names):
                raise ValueError("subtask list must be a non-empty YAML list of names")
            return names
        if expected.kind in ("psi", "phi"):
            formula_text = " ".join(body.split())
            self.space.parse(formula_text)
            return formula_text
        masks = yaml.safe_load(body)
        if not isinstance(masks, dict) or set(masks) != {"nav", "interact"}:
            raise ValueError("masks must be a mapping with keys nav and interact")
        for k in ("nav", "interact"):
            if not masks[k]:
                raise ValueError(f"{k} mask must not be empty")
            self.space.schema.mask_of(masks[k])
        return {"nav": list(masks["nav"]), "interact": list(masks["interact"])}


def run_pipeline(space, generator, cfg: VerifyConfig | None = None, max_iters: int = 5,
                 model: SymbolicModel | None = None, rewards: RewardConfig | None = None) -> PipelineResult:
    """Ask the generator for subtasks, masks and formulas, verify them, and
    re-ask for each failing formula with a debug prompt until every check
    passes or ``max_iters`` iterations are used."""
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    cfg = cfg or VerifyConfig()
    model = model or SymbolicModel.from_space(space)
    sess = _Session(space, generator)
    names = None
    answers: dict = {}
    feedback: dict = {}  # key -> prompt replacing the default one
    best = None
    history = []
    for it in range(1, max_iters + 1):
        failed_parse = False
        requests = []
        if names is None:
            requests.append(Expected("subtasks"))
        else:
            for i in range(1, len(names) + 1):
                for kind in ("masks", "psi", "phi"):
                    e = Expected(kind, i)
                    if e.key not in answers:
                        requests.append(e)
        while requests:
            e = requests.pop(0)
            prompt = feedback.pop(e.key, None) or _default_prompt(e, names)
            text = sess.ask(e, prompt)
            try:
                value = sess.parse(e, text)
            except (ValueError, FormulaError, yaml.YAMLError) as exc:
                feedback[e.key] = load_prompt("parse_error").substitute(target=e.key, error=str(exc)) + "\n\n" + \
                    _default_prompt(e, names)
                failed_parse = True
                history.append(f"iteration {it}: could not parse {e.key}: {exc}")
                break
            if e.kind == "subtasks":
                names = value
                requests = [Expected(kind, i) for i in range(1, len(names) + 1) for kind in ("masks", "psi", "phi")]
            else:
                answers[e.key] = value
        if failed_parse:
            continue

        spec = MrbtSpecFile(space.name, [
            SubtaskEntry(n, answers[f"psi{i}"], answers[f"phi{i}"], answers[f"masks{i}"]["nav"],
                         answers[f"masks{i}"]["interact"])
            for i, n in enumerate(names, start=1)], rewards or RewardConfig())
        verdicts = verify_all(spec.to_subtasks(space), model, space, cfg)
        best = (spec, verdicts)
        failures = [v for v in verdicts if not v.passed]
        history.append(f"iteration {it}: {len(verdicts) - len(failures)}/{len(verdicts)} checks passed")
        log.info(history[-1])
        if not failures:
            spec.provenance.update(generator=generator.id, iterations=it, verified=True)
            return PipelineResult(spec, verdicts, it, True, history)
        refinable = [v for v in failures if v.result.name == "COUNTEREXAMPLE"
                     and not v.message.startswith("implied by")]
        if not refinable:
            break  # only inconclusive verdicts remain; nothing to debug
        for v in refinable:
            key = _target_key(v)
            if key in feedback:
                continue
            feedback[key] = build_debug_prompt(v, spec)
            answers.pop(key, None)
    spec, verdicts = best if best else (None, [])
    if spec is not None:
        spec.provenance.update(generator=generator.id, iterations=it, verified=False)
    return PipelineResult(spec, verdicts, it, False, history)


def _default_prompt(e: Expected, names) -> str:
    if e.kind == "subtasks":
        return load_prompt("subtasks").substitute()
    return load_prompt(e.kind).substitute(index=e.index, name=names[e.index - 1])
