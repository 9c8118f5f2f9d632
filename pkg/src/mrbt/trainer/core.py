"""Rollouts with tree rewards and masks, the four ablation modes, and the
success-rate metric."""

from __future__ import annotations

import csv
import enum
import functools
import pickle
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..gridworld.env import ACTIONS, DETERMINISTIC, DynamicsConfig, predicates, step_env
from ..kernels import masked_greedy, masked_max, template_tick
from ..template import RewardConfig, label_bits
from .features import feature_key, feature_vector, objects_of_interest

log = logging.getLogger(__name__)

N_ACTIONS = len(ACTIONS)
FULL_MASK = (1 << N_ACTIONS) - 1


class AblationMode(enum.Enum):
    TASK = "task"
    PROCEDURE = "procedure"
    RBT = "rbt"
    MRBT = "mrbt"

    @classmethod
    def parse(cls, v) -> "AblationMode":
        if isinstance(v, cls):
            return v
        try:
            return cls(str(v).lower())
        except ValueError:
            raise ValueError(f"unknown mode {v!r}; expected one of {[m.value for m in cls]}") from None


class MaskViolation(AssertionError):
    pass


@dataclass
class TrainConfig:
    algorithm: str = "tabular_q"  # or "policy_gradient_small"
    total_steps: int = 200_000
    eval_interval: int = 2048
    gamma: float = 0.99
    learning_rate: float = 3e-4  # policy gradient
    q_alpha: float = 0.2
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_frac: float = 0.5  # fraction of total_steps over which epsilon decays
    feature_clip: int = 2
    seeds: tuple = (0,)
    dynamics: DynamicsConfig = field(default_factory=lambda: DETERMINISTIC)
    hidden: int = 64

    def __post_init__(self):
        if self.eval_interval <= 0:
            raise ValueError("eval_interval must be positive")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.algorithm not in ("tabular_q", "policy_gradient_small"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        self.seeds = tuple(int(s) for s in self.seeds)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d


class TemplateRunner:
    """Flat-array execution of the template tree through the tick kernel."""

    def __init__(self, subtasks, rewards: RewardConfig, full_mask=FULL_MASK):
        self.subtasks = list(subtasks)
        self.k = len(self.subtasks)
        self.rewards = rewards.as_tuple()
        masks = []
        for st in self.subtasks:
            masks += [full_mask, st.mask_nav, st.mask_interact]
        self.leaf_masks = masks
        self.states = bytearray(3 * self.k)
        self.reset()

    def reset(self):
        for i in range(self.k):
            self.states[3 * i] = 0  # condition: Failure
            self.states[3 * i + 1] = 2  # navigation: Running
            self.states[3 * i + 2] = 2  # interaction: Running

    def tick(self, psi_bits, phi_bits):
        reward, last, _, _ = template_tick(self.states, self.k, psi_bits, phi_bits, self.rewards)
        return reward, self.leaf_masks[last], last


class Episode:
    """One environment episode with its tree and mode-specific reward rule."""

    def __init__(self, space, subtasks, mode: AblationMode, rewards: RewardConfig, dynamics, rng):
        self.space = space
        self.subtasks = subtasks
        self.mode = mode
        self.rewards = rewards
        self.dyn = dynamics
        self.rng = rng
        self.runner = TemplateRunner(subtasks, rewards) if subtasks else None

    def reset(self, s, task):
        self.s, self.task = s, task
        self.t = 0
        self.pointer = 0
        self.sub_rewards = [0.0] * len(self.subtasks or ())
        self.mask = FULL_MASK
        p = predicates(s)
        if self.runner is not None:
            self.runner.reset()
            psi, phi = label_bits(self.subtasks, p, task.bindings)
            # initial tick only selects the first mask; its reward is discarded
            _, mask, _ = self.runner.tick(psi, phi)
            if self.mode is AblationMode.MRBT:
                self.mask = mask
        return self.mask

    def step(self, a):
        """Returns (reward, done, truncated, next mask)."""
        if self.mode is AblationMode.MRBT and not (self.mask >> a) & 1:
            raise MaskViolation(f"action {ACTIONS[a]} outside mask {self.mask:b}")
        s2 = step_env(self.s, a, self.dyn, self.rng)
        p = predicates(s2)
        done = self.task.complete(p)
        r = self.rewards.task_bonus if done else 0.0
        mode = self.mode
        if mode is AblationMode.PROCEDURE:
            while self.pointer < len(self.subtasks) and self.subtasks[self.pointer].psi.compiled(p, self.task.bindings):
                r += self.rewards.reward_on_true
                self.sub_rewards[self.pointer] += self.rewards.reward_on_true
                self.pointer += 1
        elif mode in (AblationMode.RBT, AblationMode.MRBT):
            psi, phi = label_bits(self.subtasks, p, self.task.bindings)
            tr, mask, _ = self.runner.tick(psi, phi)
            r += tr
            self.mask = mask if mode is AblationMode.MRBT else FULL_MASK
        self.s = s2
        self.t += 1
        truncated = not done and self.t >= self.space.max_steps
        return r, done, truncated, self.mask


# ----------------------------------------------------------------- policies

@functools.lru_cache(maxsize=4096)
def _objects(space_name, task):
    return tuple(objects_of_interest(space_name, task.bindings))


def pg_observation(s, task, space_name, size, n_pointer=0, pointer=0):
    x = feature_vector(s, _objects(space_name, task), size)
    if n_pointer:
        onehot = np.zeros(n_pointer)
        onehot[pointer] = 1.0
        x = np.concatenate([x, onehot])
    return x


class TabularQ:
    def __init__(self, space_name, clip=3, procedure=False):
        self.q: dict = {}
        self.space_name = space_name
        self.clip = clip
        self.procedure = procedure

    def key(self, s, task, pointer=0):
        k = feature_key(s, _objects(self.space_name, task), self.clip)
        return (k, pointer) if self.procedure else k

    def values(self, key):
        v = self.q.get(key)
        if v is None:
            v = self.q[key] = np.zeros(N_ACTIONS)
        return v

    def greedy(self, key, mask, u):
        return masked_greedy(self.values(key), mask, u)


def _sample_masked(rng, mask):
    legal = [a for a in range(N_ACTIONS) if mask >> a & 1]
    if not legal:
        raise MaskViolation("empty action mask")
    return legal[int(rng.integers(len(legal)))]


class MlpPolicy:
    """Two-layer softmax policy with a value baseline, trained by REINFORCE."""

    def __init__(self, in_dim, hidden, rng, lr=3e-4):
        self.W1 = rng.normal(0, 1 / np.sqrt(in_dim), (in_dim, hidden))
        self.b1 = np.zeros(hidden)
        self.W2 = rng.normal(0, 0.01, (hidden, N_ACTIONS))
        self.b2 = np.zeros(N_ACTIONS)
        self.Wv = np.zeros(hidden)
        self.bv = 0.0
        self.lr = lr
        self._adam = {}
        self._t = 0

    def params(self):
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2, "Wv": self.Wv}

    def forward(self, x, mask):
        h = np.tanh(x @ self.W1 + self.b1)
        logits = h @ self.W2 + self.b2
        bits = np.array([(mask >> a) & 1 for a in range(N_ACTIONS)], dtype=bool)
        logits = np.where(bits, logits, -np.inf)
        z = logits - logits[bits].max()
        p = np.exp(z)
        p /= p.sum()
        return h, p, float(h @ self.Wv + self.bv)

    def act(self, x, mask, rng, greedy=False):
        _, p, _ = self.forward(x, mask)
        if greedy:
            return int(np.argmax(p))
        return int(rng.choice(N_ACTIONS, p=p))

    def update(self, xs, masks, acts, returns):
        grads = {k: np.zeros_like(v) for k, v in self.params().items()}
        gbv = 0.0
        n = len(xs)
        for x, m, a, g in zip(xs, masks, acts, returns):
            h, p, v = self.forward(x, m)
            adv = g - v
            dlogits = -p
            dlogits[a] += 1.0
            dlogits *= adv  # ascent direction
            grads["W2"] += np.outer(h, dlogits)
            grads["b2"] += dlogits
            dh = self.W2 @ dlogits
            dv = adv  # value regression toward the return
            grads["Wv"] += h * dv
            gbv += dv
            dh = dh + self.Wv * dv
            dpre = dh * (1 - h * h)
            grads["W1"] += np.outer(x, dpre)
            grads["b1"] += dpre
        self._t += 1
        for k, p in self.params().items():
            g = grads[k] / n
            m, v = self._adam.get(k, (np.zeros_like(p), np.zeros_like(p)))
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            self._adam[k] = (m, v)
            mh = m / (1 - 0.9 ** self._t)
            vh = v / (1 - 0.999 ** self._t)
            p += self.lr * mh / (np.sqrt(vh) + 1e-8)
        self.bv += self.lr * gbv / n


# -------------------------------------------------------------- reporting

@dataclass
class SeedRun:
    seed: int
    steps: list = field(default_factory=list)
    success: list = field(default_factory=list)
    mean_reward: list = field(default_factory=list)
    episodes: int = 0
    successes: int = 0
    min_subtask_reward: float = 0.0
    max_subtask_reward: float = 0.0
    policy: object = None

    @property
    def final_success(self) -> float:
        return self.success[-1] if self.success else 0.0

    def steps_to(self, threshold: float) -> int | None:
        for st, sr in zip(self.steps, self.success):
            if sr >= threshold:
                return st
        return None


@dataclass
class TrainReport:
    mode: AblationMode
    config: TrainConfig
    runs: list
    mask_checks: int = 0

    @property
    def mean_final_success(self) -> float:
        return float(np.mean([r.final_success for r in self.runs]))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["global_step", "seed", "mode", "success_rate", "mean_episode_reward"])
            for r in self.runs:
                for st, sr, mr in zip(r.steps, r.success, r.mean_reward):
                    w.writerow([st, r.seed, self.mode.value, f"{sr:.6f}", f"{mr:.6f}"])

    def write_manifest(self, path, **extra):
        d = {"mode": self.mode.value, "config": _plain(self.config.to_dict()),
             "final_success": {r.seed: r.final_success for r in self.runs}}
        d.update(_plain(extra))
        Path(path).write_text(yaml.safe_dump(d, sort_keys=False))


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (str, int, float, bool)) or v is None:
        return v
    return str(v)


# ------------------------------------------------------------------ train

def train(space, subtasks, mode, cfg: TrainConfig, rewards: RewardConfig | None = None) -> TrainReport:
    """Train one policy per seed and record tumbling-window success rates.

    ``subtasks`` is a list of SubtaskSpec (it may be empty for Task mode).
    """
    mode = AblationMode.parse(mode)
    rewards = rewards or RewardConfig()
    if mode is not AblationMode.TASK and not subtasks:
        raise ValueError(f"mode {mode.value} needs subtasks")
    report = TrainReport(mode, cfg, [])
    for seed in cfg.seeds:
        run = (_train_q if cfg.algorithm == "tabular_q" else _train_pg)(space, subtasks, mode, cfg, rewards, seed, report)
        report.runs.append(run)
        log.info("mode=%s seed=%d final success %.3f", mode.value, seed, run.final_success)
    return report


class _Windows:
    def __init__(self, run: SeedRun, interval):
        self.run = run
        self.interval = interval
        self.ended = 0
        self.completed = 0
        self.rewards = []
        self.last = 0.0

    def episode_end(self, success, ep_reward):
        self.ended += 1
        self.completed += int(success)
        self.rewards.append(ep_reward)
        self.run.episodes += 1
        self.run.successes += int(success)

    def tick(self, global_step):
        if global_step % self.interval:
            return
        if self.ended:
            self.last = self.completed / self.ended
        self.run.steps.append(global_step)
        self.run.success.append(self.last)
        self.run.mean_reward.append(float(np.mean(self.rewards)) if self.rewards else 0.0)
        self.ended = self.completed = 0
        self.rewards = []


def _train_q(space, subtasks, mode, cfg, rewards, seed, report):
    rng_env = np.random.default_rng([seed, 1])
    rng_pol = np.random.default_rng([seed, 2])
    rng_dyn = np.random.default_rng([seed, 3])
    run = SeedRun(seed)
    win = _Windows(run, cfg.eval_interval)
    pol = TabularQ(space.name, cfg.feature_clip, procedure=mode is AblationMode.PROCEDURE)
    ep = Episode(space, subtasks, mode, rewards, cfg.dynamics, rng_dyn)
    decay = max(1, int(cfg.total_steps * cfg.eps_decay_frac))
    gamma, alpha = cfg.gamma, cfg.q_alpha

    s, task = space.sample_episode(rng_env)
    mask = ep.reset(s, task)
    key = pol.key(s, task, 0)
    ep_reward = 0.0
    masked = mode is AblationMode.MRBT
    for step in range(1, cfg.total_steps + 1):
        eps = max(cfg.eps_end, cfg.eps_start - (cfg.eps_start - cfg.eps_end) * (step - 1) / decay)
        if rng_pol.random() < eps:
            a = _sample_masked(rng_pol, mask)
        else:
            a = pol.greedy(key, mask, rng_pol.random())
        if masked:
            report.mask_checks += 1
        r, done, trunc, mask2 = ep.step(a)
        key2 = pol.key(ep.s, task, ep.pointer)
        q = pol.values(key)
        target = r if done else r + gamma * masked_max(pol.values(key2), mask2)
        q[a] += alpha * (target - q[a])
        ep_reward += r
        if done or trunc:
            win.episode_end(done, ep_reward)
            _track_procedure(run, ep, mode)
            s, task = space.sample_episode(rng_env)
            mask = ep.reset(s, task)
            key = pol.key(s, task, 0)
            ep_reward = 0.0
        else:
            key, mask = key2, mask2
        win.tick(step)
    run.policy = QPolicy(pol)
    return run


def _track_procedure(run, ep, mode):
    if mode is AblationMode.PROCEDURE and ep.sub_rewards:
        run.min_subtask_reward = min(run.min_subtask_reward, min(ep.sub_rewards))
        run.max_subtask_reward = max(run.max_subtask_reward, max(ep.sub_rewards))


def _train_pg(space, subtasks, mode, cfg, rewards, seed, report):
    rng_env = np.random.default_rng([seed, 1])
    rng_pol = np.random.default_rng([seed, 2])
    rng_dyn = np.random.default_rng([seed, 3])
    run = SeedRun(seed)
    win = _Windows(run, cfg.eval_interval)
    s0, t0 = space.sample_episode(rng_env)
    n_ptr = len(subtasks) + 1 if mode is AblationMode.PROCEDURE else 0
    dim = len(pg_observation(s0, t0, space.name, space.size, n_ptr))
    net = MlpPolicy(dim, cfg.hidden, rng_pol, cfg.learning_rate)
    ep = Episode(space, subtasks, mode, rewards, cfg.dynamics, rng_dyn)
    masked = mode is AblationMode.MRBT

    def obs(e):
        return pg_observation(e.s, e.task, space.name, space.size, n_ptr, e.pointer)

    s, task = s0, t0
    mask = ep.reset(s, task)
    buf = ([], [], [], [])
    rews = []
    for step in range(1, cfg.total_steps + 1):
        x = obs(ep)
        a = net.act(x, mask, rng_pol)
        if masked:
            report.mask_checks += 1
        r, done, trunc, mask2 = ep.step(a)
        buf[0].append(x)
        buf[1].append(mask)
        buf[2].append(a)
        rews.append(r)
        mask = mask2
        if done or trunc:
            g, rets = 0.0, []
            for rr in reversed(rews):
                g = rr + cfg.gamma * g
                rets.append(g)
            buf[3].extend(reversed(rets))
            win.episode_end(done, float(sum(rews)))
            _track_procedure(run, ep, mode)
            rews = []
            if len(buf[0]) >= 256:
                net.update(*buf)
                buf = ([], [], [], [])
            s, task = space.sample_episode(rng_env)
            mask = ep.reset(s, task)
        win.tick(step)
    run.policy = NetPolicy(net, space.name, space.size, n_ptr)
    return run


# --------------------------------------------------------------- policies

class QPolicy:
    """Greedy policy over a learned Q table."""

    def __init__(self, q: TabularQ):
        self.qt = q

    def reset(self, s, task):
        pass

    def act(self, s, task, mask, rng, pointer=0):
        v = self.qt.q.get(self.qt.key(s, task, pointer))
        if v is None:
            return _sample_masked(rng, mask)
        return masked_greedy(v, mask, rng.random())


class NetPolicy:
    def __init__(self, net: MlpPolicy, space_name, size, n_pointer=0):
        self.net = net
        self.space_name = space_name
        self.size = size
        self.n_pointer = n_pointer

    def reset(self, s, task):
        pass

    def act(self, s, task, mask, rng, pointer=0):
        x = pg_observation(s, task, self.space_name, self.size, self.n_pointer, pointer)
        return self.net.act(x, mask, rng, greedy=True)


class RandomPolicy:
    def reset(self, s, task):
        pass

    def act(self, s, task, mask, rng, pointer=0):
        return _sample_masked(rng, mask)


class ExpertPolicy:
    """Replans a shortest subgoal sequence whenever its plan runs out or the
    state drifts from the plan (e.g. after a stochastic key drop)."""

    def __init__(self, space):
        self.space = space
        self.plan = []
        self.expect = None

    def reset(self, s, task):
        self.plan, self.expect = [], None

    def act(self, s, task, mask, rng, pointer=0):
        from ..gridworld.env import apply_action
        from ..gridworld.spaces import expert_actions

        if not self.plan or s != self.expect:
            self.plan = expert_actions(self.space, s, task) or [6]
        a = self.plan.pop(0)
        self.expect = apply_action(s, a)
        return a


def evaluate(policy, space, subtasks, mode, episodes: int, dynamics: DynamicsConfig = DETERMINISTIC,
             seed: int = 0, rewards: RewardConfig | None = None, trace=None) -> float:
    """Fraction of ``episodes`` greedy rollouts that reach the goal.

    ``trace`` (an ``EpisodeTrace``) receives the steps of the first episode.
    """
    mode = AblationMode.parse(mode)
    rng_env = np.random.default_rng([seed, 11])
    rng_pol = np.random.default_rng([seed, 12])
    ep = Episode(space, subtasks, mode, rewards or RewardConfig(), dynamics, np.random.default_rng([seed, 13]))
    wins = 0
    for n in range(episodes):
        s, task = space.sample_episode(rng_env)
        mask = ep.reset(s, task)
        policy.reset(s, task)
        while True:
            a = policy.act(ep.s, task, mask, rng_pol, ep.pointer)
            s_prev = ep.s
            r, done, trunc, mask = ep.step(a)
            if trace is not None and n == 0:
                trace.record(ep.t - 1, s_prev, a, r, done)
            if done or trunc:
                wins += int(done)
                break
    return wins / episodes


def save_policy(policy, path) -> Path:
    if not isinstance(policy, (QPolicy, NetPolicy)):
        raise TypeError(f"cannot save a {type(policy).__name__}")
    path = Path(path)
    with path.open("wb") as fh:
        pickle.dump(policy, fh)
    return path


def load_policy(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"policy file not found: {path}")
    with path.open("rb") as fh:
        pol = pickle.load(fh)
    if not isinstance(pol, (QPolicy, NetPolicy)):
        raise ValueError(f"{path} does not hold a policy")
    return pol
