"""Command-line entry point: generate, verify, train, eval, metrics, demo-test.

Exit codes: 0 success; 1 a check failed (counterexample) or training/eval
failed its purpose; 2 inconclusive verification; 3 missing or unreadable
files; 4 invalid arguments or configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import yaml

EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_IO, EXIT_USAGE = 0, 1, 2, 3, 4

DEFAULTS = {
    "space": None,
    "spec": None,
    "scale": "mini",
    "out": "mrbt_out",
    "force": False,
    "mode": "mrbt",
    "seed": "0",
    "stochastic": False,
    "verify": {"horizon": 25, "n_distinct": 3, "timeout": 900.0},
    "train": {"steps": 200_000, "algorithm": "tabular_q", "eval_interval": 2048},
    "eval": {"episodes": 100, "policy": None},
    "generator": {"kind": None, "path": None, "max_iters": 5},
    "demo": {"n": 10, "drop_key": False},
}

# flag name -> (section, key) in the run configuration
FLAG_MAP = {
    "space": (None, "space"), "spec": (None, "spec"), "scale": (None, "scale"), "out": (None, "out"),
    "force": (None, "force"), "mode": (None, "mode"), "seed": (None, "seed"), "stochastic": (None, "stochastic"),
    "horizon": ("verify", "horizon"), "n_distinct": ("verify", "n_distinct"), "timeout": ("verify", "timeout"),
    "steps": ("train", "steps"), "algorithm": ("train", "algorithm"), "eval_interval": ("train", "eval_interval"),
    "episodes": ("eval", "episodes"), "policy": ("eval", "policy"),
    "generator": ("generator", "kind"), "script": ("generator", "path"), "max_iters": ("generator", "max_iters"),
    "n": ("demo", "n"), "drop_key": ("demo", "drop_key"),
}


class CliError(Exception):
    def __init__(self, msg, code=EXIT_USAGE):
        super().__init__(msg)
        self.code = code


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, k):
        return self.values[k]

    def section(self, name) -> dict:
        return self.values[name]

    @property
    def out(self) -> Path:
        return Path(self.values["out"])

    @property
    def seeds(self) -> tuple:
        try:
            return tuple(int(x) for x in str(self.values["seed"]).split(",") if x.strip())
        except ValueError:
            raise CliError(f"bad --seed value {self.values['seed']!r}") from None

    @property
    def scale(self):
        s = self.values["scale"]
        return int(s) if isinstance(s, str) and s.isdigit() else s


def load_config(args) -> RunConfig:
    """Defaults, then the YAML file given by --config, then explicit flags."""
    vals = json.loads(json.dumps(DEFAULTS))
    if args.config:
        p = Path(args.config)
        if not p.is_file():
            raise CliError(f"config file not found: {p}", EXIT_IO)
        try:
            file_vals = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise CliError(f"config file {p} is not valid YAML: {exc}") from None
        if not isinstance(file_vals, dict):
            raise CliError(f"config file {p} must hold a mapping")
        for k, v in file_vals.items():
            if isinstance(vals.get(k), dict) and isinstance(v, dict):
                vals[k].update(v)
            else:
                vals[k] = v
    for flag, (sec, key) in FLAG_MAP.items():
        v = getattr(args, flag, None)
        if v is None:
            continue
        if sec is None:
            vals[key] = v
        else:
            vals[sec][key] = v
    return RunConfig(vals)


# ------------------------------------------------------------------ helpers

def _space(cfg: RunConfig, spec=None):
    from .gridworld.spaces import make_task_space

    name = cfg["space"] or (spec.task_space if spec is not None else None)
    if not name:
        raise CliError("no task space given (use --space or a spec file)")
    try:
        return make_task_space(name, cfg.scale)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _read_spec(cfg: RunConfig, required=True):
    from .genpipeline import read_spec

    path = cfg["spec"]
    if not path:
        if required:
            raise CliError("this command needs --spec")
        return None
    p = Path(path)
    if not p.is_file():
        raise CliError(f"spec file not found: {p}", EXIT_IO)
    try:
        return read_spec(p)
    except (ValueError, yaml.YAMLError) as exc:
        raise CliError(f"cannot read spec file {p}: {exc}", EXIT_IO) from None


def _subtasks(spec, space):
    from .formula import FormulaError

    try:
        return spec.to_subtasks(space)
    except (FormulaError, ValueError) as exc:
        raise CliError(f"spec file does not parse against {space.name}: {exc}") from None


def _verify_cfg(cfg: RunConfig):
    from .verifier import VerifyConfig

    v = cfg.section("verify")
    try:
        return VerifyConfig(horizon=int(v["horizon"]), n_distinct=int(v["n_distinct"]),
                            timeout_secs=float(v["timeout"]), scale=cfg.scale)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad verification settings: {exc}") from None


def _dynamics(cfg: RunConfig, seed=0):
    from .gridworld.env import DynamicsConfig

    return DynamicsConfig(stochastic=bool(cfg["stochastic"]), rng_seed=seed)


def _prepare_out(cfg: RunConfig, cmd: str):
    """Returns the stored exit code when outputs exist and --force is not set."""
    out = cfg.out
    status = out / f"{cmd}.status"
    if status.exists() and not cfg["force"]:
        code = int(status.read_text().strip() or 0)
        print(f"{cmd}: outputs already in {out} (exit {code}); use --force to recompute")
        return code
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc}", EXIT_IO) from None
    return None


def _finish(cfg: RunConfig, cmd: str, code: int) -> int:
    (cfg.out / f"{cmd}.status").write_text(f"{code}\n")
    return code


def _write_verdicts(out: Path, verdicts, stem="verify"):
    from .verifier.report import verdict_table, write_trace

    table = verdict_table(verdicts)
    (out / f"{stem}_verdicts.txt").write_text(table + "\n")
    cdir = out / "counterexamples"
    for v in verdicts:
        if v.trace is not None and not v.passed:
            cdir.mkdir(exist_ok=True)
            name = f"{stem}_{v.spec.value}_{v.subtask_index or 0}.jsonl"
            write_trace(cdir / name, v)
    return table


def _verdict_code(verdicts) -> int:
    if any(v.result.name == "COUNTEREXAMPLE" for v in verdicts):
        return EXIT_FAIL
    if any(v.result.name == "INCONCLUSIVE" for v in verdicts):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


# ----------------------------------------------------------------- commands

def cmd_verify(cfg: RunConfig) -> int:
    from .verifier import SymbolicModel, verify_all

    spec = _read_spec(cfg)
    space = _space(cfg, spec)
    subs = _subtasks(spec, space)
    vcfg = _verify_cfg(cfg)
    skip = _prepare_out(cfg, "verify")
    if skip is not None:
        return skip
    verdicts = verify_all(subs, SymbolicModel.from_space(space), space, vcfg)
    print(_write_verdicts(cfg.out, verdicts))
    code = _verdict_code(verdicts)
    for v in verdicts:
        if not v.passed and not v.message.startswith("implied by"):
            print(f"{v.spec.value} (subtask {v.subtask_index}): {v.result.value}: {v.message}")
    return _finish(cfg, "verify", code)


def cmd_generate(cfg: RunConfig) -> int:
    from .genpipeline import ChatGenerator, GeneratorError, ScriptedGenerator, run_pipeline, write_spec

    space = _space(cfg)
    g = cfg.section("generator")
    kind = g.get("kind") or ("scripted" if g.get("path") else None)
    if kind == "scripted":
        if not g.get("path") or not Path(g["path"]).is_file():
            raise CliError(f"scripted generator file not found: {g.get('path')}", EXIT_IO)
        gen = ScriptedGenerator.from_file(g["path"])
    elif kind == "chat":
        try:
            gen = ChatGenerator()
        except GeneratorError as exc:
            raise CliError(str(exc)) from None
    else:
        raise CliError("choose a generator: --generator scripted --script FILE, or --generator chat")
    skip = _prepare_out(cfg, "generate")
    if skip is not None:
        return skip
    try:
        res = run_pipeline(space, gen, _verify_cfg(cfg), max_iters=int(g.get("max_iters") or 5))
    except GeneratorError as exc:
        print(f"generate: generator failed: {exc}", file=sys.stderr)
        return _finish(cfg, "generate", EXIT_FAIL)
    if res.spec is not None:
        write_spec(cfg.out / "spec.yaml", res.spec)
        _write_verdicts(cfg.out, res.verdicts, stem="generate")
    (cfg.out / "generate_history.txt").write_text("\n".join(res.history) + "\n")
    state = "verified" if res.verified else "NOT verified"
    print(f"generate: {state} after {res.iterations} iteration(s); spec written to {cfg.out / 'spec.yaml'}")
    return _finish(cfg, "generate", EXIT_OK if res.verified else EXIT_FAIL)


def cmd_train(cfg: RunConfig) -> int:
    from .trainer import AblationMode, TrainConfig, save_policy, train

    try:
        mode = AblationMode.parse(cfg["mode"])
    except ValueError as exc:
        raise CliError(str(exc)) from None
    spec = _read_spec(cfg, required=mode is not AblationMode.TASK)
    space = _space(cfg, spec)
    subs = _subtasks(spec, space) if spec is not None else []
    t = cfg.section("train")
    seeds = cfg.seeds
    try:
        tcfg = TrainConfig(algorithm=t["algorithm"], total_steps=int(t["steps"]),
                           eval_interval=int(t["eval_interval"]), seeds=seeds, dynamics=_dynamics(cfg, seeds[0]))
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad training settings: {exc}") from None
    skip = _prepare_out(cfg, "train")
    if skip is not None:
        return skip
    rep = train(space, subs, mode, tcfg, rewards=spec.rewards if spec else None)
    rep.write_csv(cfg.out / "metrics.csv")
    rep.write_manifest(cfg.out / "manifest.yaml", space=space.name, scale=str(cfg.scale), spec=cfg["spec"],
                       stochastic=bool(cfg["stochastic"]))
    for r in rep.runs:
        save_policy(r.policy, cfg.out / f"policy_seed{r.seed}.pkl")
    print(f"train: mode={mode.value} seeds={list(seeds)} mean final success {rep.mean_final_success:.3f}")
    return _finish(cfg, "train", EXIT_OK)


def cmd_eval(cfg: RunConfig) -> int:
    from .gridworld.trace import EpisodeTrace
    from .trainer import AblationMode, evaluate, load_policy

    e = cfg.section("eval")
    if not e.get("policy"):
        raise CliError("eval needs --policy")
    ppath = Path(e["policy"])
    if not ppath.is_file():
        raise CliError(f"policy file not found: {ppath}", EXIT_IO)
    try:
        mode = AblationMode.parse(cfg["mode"])
    except ValueError as exc:
        raise CliError(str(exc)) from None
    spec = _read_spec(cfg, required=mode is not AblationMode.TASK)
    space = _space(cfg, spec)
    subs = _subtasks(spec, space) if spec is not None else []
    try:
        pol = load_policy(ppath)
    except (OSError, ValueError, EOFError) as exc:
        raise CliError(f"cannot load policy {ppath}: {exc}", EXIT_IO) from None
    skip = _prepare_out(cfg, "eval")
    if skip is not None:
        return skip
    n = int(e["episodes"])
    trace = EpisodeTrace()
    sr = evaluate(pol, space, subs, mode, n, _dynamics(cfg, cfg.seeds[0]), seed=cfg.seeds[0], trace=trace)
    trace.write(cfg.out / "eval_episode0.csv")
    (cfg.out / "eval.yaml").write_text(yaml.safe_dump(
        {"policy": str(ppath), "mode": mode.value, "episodes": n, "stochastic": bool(cfg["stochastic"]),
         "success_rate": sr}, sort_keys=False))
    print(f"eval: success rate {sr:.3f} over {n} episodes")
    return _finish(cfg, "eval", EXIT_OK)


def metrics_line(k: int) -> str:
    from .template import HRM_REFERENCE_K3, structure_metrics

    m = structure_metrics(k)
    return (f"MRBT: {m.behaviors} behaviors, {m.rm_states} states, {m.rm_edges} edges; "
            f"HRM(ref): {HRM_REFERENCE_K3['states']} states, {HRM_REFERENCE_K3['edges']} edges")


def cmd_metrics(cfg: RunConfig) -> int:
    spec = _read_spec(cfg)
    skip = _prepare_out(cfg, "metrics")
    if skip is not None:
        return skip
    line = metrics_line(spec.k)
    (cfg.out / "metrics.txt").write_text(line + "\n")
    print(line)
    return _finish(cfg, "metrics", EXIT_OK)


def cmd_demo_test(cfg: RunConfig) -> int:
    from .verifier.demos import expert_demos, mine_mask_priors, random_demos, test_with_demonstrations

    spec = _read_spec(cfg)
    space = _space(cfg, spec)
    subs = _subtasks(spec, space)
    d = cfg.section("demo")
    n = int(d["n"])
    seed = cfg.seeds[0]
    skip = _prepare_out(cfg, "demo-test")
    if skip is not None:
        return skip
    experts = expert_demos(space, n, seed=seed, drop_key=bool(d.get("drop_key")))
    randoms = random_demos(space, n, int(cfg.section("verify")["horizon"]), seed=seed)
    verdicts = test_with_demonstrations(subs, experts, randoms, n=n)
    priors = mine_mask_priors(subs, space.schema, experts)
    print(_write_verdicts(cfg.out, verdicts, stem="demo"))
    (cfg.out / "mask_priors.yaml").write_text(yaml.safe_dump({k: sorted(v) for k, v in sorted(priors.items())}))
    code = EXIT_FAIL if any(not v.passed for v in verdicts) else EXIT_OK
    print(f"demo-test: {sum(v.passed for v in verdicts)}/{len(verdicts)} checks passed on {n} demonstrations")
    return _finish(cfg, "demo-test", code)


COMMANDS = {
    "generate": cmd_generate, "verify": cmd_verify, "train": cmd_train, "eval": cmd_eval,
    "metrics": cmd_metrics, "demo-test": cmd_demo_test,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mrbt", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("--config", help="YAML run configuration; flags override its values")
        c.add_argument("--space", choices=["doorkey", "lockedroom", "dronesupplier"])
        c.add_argument("--spec", help="MRBT spec file")
        c.add_argument("--scale", help="full, mini, or a grid size (doorkey)")
        c.add_argument("--out", help="output directory")
        c.add_argument("--force", action="store_true", default=None, help="recompute existing outputs")
        c.add_argument("--seed", help="seed or comma-separated seeds")
        c.add_argument("--mode", help="task, procedure, rbt or mrbt")
        c.add_argument("--stochastic", action="store_true", default=None)
        c.add_argument("--timeout", type=float, help="verification timeout per check, seconds")
        c.add_argument("--horizon", type=int)
        c.add_argument("--n-distinct", dest="n_distinct", type=int)
        if name == "train":
            c.add_argument("--steps", type=int)
            c.add_argument("--algorithm", choices=["tabular_q", "policy_gradient_small"])
            c.add_argument("--eval-interval", dest="eval_interval", type=int)
        if name == "eval":
            c.add_argument("--policy")
            c.add_argument("--episodes", type=int)
        if name == "generate":
            c.add_argument("--generator", choices=["scripted", "chat"])
            c.add_argument("--script", help="scripted generator response file (YAML)")
            c.add_argument("--max-iters", dest="max_iters", type=int)
        if name == "demo-test":
            c.add_argument("--n", type=int)
            c.add_argument("--drop-key", dest="drop_key", action="store_true", default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except CliError as exc:
        print(f"mrbt {args.command}: error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"mrbt {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
