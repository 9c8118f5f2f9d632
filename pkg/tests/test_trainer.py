import numpy as np
import pytest

from mrbt.genpipeline import reference_spec
from mrbt.gridworld.env import DROP, DynamicsConfig, TOGGLE
from mrbt.gridworld.spaces import expert_actions
from mrbt.template import RewardConfig
from mrbt.trainer import (
    AblationMode, ExpertPolicy, MaskViolation, RandomPolicy, TrainConfig, evaluate, load_policy, save_policy, train,
)
from mrbt.trainer.core import FULL_MASK, Episode, MlpPolicy, SeedRun, _Windows, pg_observation
from mrbt.trainer.features import feature_dim, feature_key, feature_vector, objects_of_interest

STOCH = DynamicsConfig(stochastic=True)


@pytest.fixture(scope="module")
def dk8_subs(doorkey8):
    return reference_spec(doorkey8).to_subtasks(doorkey8)


@pytest.fixture(scope="module")
def lr_subs(lockedroom_mini):
    return reference_spec(lockedroom_mini).to_subtasks(lockedroom_mini)


def run_expert(space, subs, mode, seed, dyn=STOCH, n=20):
    rng = np.random.default_rng(seed)
    ep = Episode(space, subs, AblationMode.parse(mode), RewardConfig(), dyn, np.random.default_rng(seed + 1))
    out = []
    for _ in range(n):
        s, task = space.sample_episode(rng)
        ep.reset(s, task)
        pol = ExpertPolicy(space)
        pol.reset(s, task)
        rewards = []
        while True:
            r, done, trunc, _ = ep.step(pol.act(ep.s, task, ep.mask, rng))
            rewards.append(r)
            if done or trunc:
                break
        out.append((list(ep.sub_rewards), rewards, done))
    return out


def test_mode_parse():
    assert AblationMode.parse("MRBT") is AblationMode.MRBT
    with pytest.raises(ValueError):
        AblationMode.parse("ppo")


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(algorithm="dqn")
    with pytest.raises(ValueError):
        TrainConfig(seeds=())
    assert TrainConfig(seeds=[1, 2]).seeds == (1, 2)


def test_mask_violation_raises(doorkey8, dk8_subs, rng):
    ep = Episode(doorkey8, dk8_subs, AblationMode.MRBT, RewardConfig(), STOCH, rng)
    s, task = doorkey8.sample_episode(rng)
    mask = ep.reset(s, task)
    assert mask == dk8_subs[0].mask_nav
    with pytest.raises(MaskViolation):
        ep.step(TOGGLE)


def test_rbt_mode_never_masks(doorkey8, dk8_subs, rng):
    ep = Episode(doorkey8, dk8_subs, AblationMode.RBT, RewardConfig(), STOCH, rng)
    s, task = doorkey8.sample_episode(rng)
    assert ep.reset(s, task) == FULL_MASK
    for _ in range(20):
        assert ep.step(TOGGLE)[3] == FULL_MASK


def test_procedure_rewards_are_one_shot(lockedroom_mini, lr_subs):
    """Subtask reward never goes negative and each subtask pays at most once,
    even when the key drops after being picked up."""
    for sub, rewards, _ in run_expert(lockedroom_mini, lr_subs, "procedure", 0, DynamicsConfig(True, 0.3)):
        assert all(r in (0.0, 1.0) for r in sub)
        assert min(rewards) >= 0.0


def test_mrbt_penalises_regressions(lockedroom_mini, lr_subs):
    runs = run_expert(lockedroom_mini, lr_subs, "mrbt", 0, DynamicsConfig(True, 0.3))
    assert any(min(rw) < 0 for _, rw, _ in runs)


def test_task_bonus_on_completion(doorkey8, dk8_subs):
    for _, rewards, done in run_expert(doorkey8, [], "task", 3, n=5):
        assert done
        assert rewards[-1] == 10.0 and sum(rewards) == 10.0


def test_expert_completes_under_mask(doorkey8, dk8_subs):
    """The reference masks leave the expert's action in every tree state legal."""
    for _, _, done in run_expert(doorkey8, dk8_subs, "mrbt", 5, DynamicsConfig(), n=10):
        assert done


def test_windows_carry_previous_value():
    run = SeedRun(0)
    w = _Windows(run, 10)
    w.episode_end(True, 1.0)
    w.episode_end(False, 0.0)
    w.tick(10)
    w.tick(20)  # no episode ended in this window
    w.episode_end(True, 2.0)
    w.tick(30)
    assert run.steps == [10, 20, 30]
    assert run.success == [0.5, 0.5, 1.0]
    assert run.mean_reward == [0.5, 0.0, 2.0]
    assert run.steps_to(0.9) == 30 and run.steps_to(1.1) is None


def test_feature_vector_dim(lockedroom_mini, rng):
    s, task = lockedroom_mini.sample_episode(rng)
    objs = objects_of_interest("lockedroom", task.bindings)
    assert len(feature_vector(s, objs, lockedroom_mini.size)) == feature_dim(len(objs))
    k = feature_key(s, objs, 2)
    assert all(abs(c) <= 2 for item in k[3:] if item[0] is not None for c in item[:2])
    assert len(pg_observation(s, task, "lockedroom", 7, 5, 2)) == feature_dim(len(objs)) + 5


def test_mlp_learns_and_respects_mask():
    rng = np.random.default_rng(0)
    net = MlpPolicy(4, 8, rng, lr=0.05)
    x = np.ones(4)
    mask = 0b0000111
    p0 = net.forward(x, mask)[1]
    assert np.all(p0[3:] == 0) and p0[:3].sum() == pytest.approx(1.0)
    for _ in range(50):
        net.update([x], [mask], [2], [1.0])
    assert net.forward(x, mask)[1][2] > p0[2] + 0.3
    assert net.act(x, 0b1000000, rng) == 6


def test_train_small_q(doorkey8, dk8_subs, tmp_path):
    cfg = TrainConfig(total_steps=6000, eval_interval=2000, seeds=(0,))
    rep = train(doorkey8, dk8_subs, "mrbt", cfg)
    assert rep.mask_checks == 6000
    run = rep.runs[0]
    assert run.steps == [2000, 4000, 6000]
    rep.write_csv(tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "global_step,seed,mode,success_rate,mean_episode_reward" and len(lines) == 4
    rep.write_manifest(tmp_path / "man.yaml", space="doorkey")
    p = save_policy(run.policy, tmp_path / "p.pkl")
    pol = load_policy(p)
    sr = evaluate(pol, doorkey8, dk8_subs, "mrbt", 5)
    assert 0.0 <= sr <= 1.0


def test_train_needs_subtasks(doorkey8):
    with pytest.raises(ValueError):
        train(doorkey8, [], "rbt", TrainConfig(total_steps=10))


def test_train_policy_gradient_runs(doorkey8, dk8_subs):
    cfg = TrainConfig(algorithm="policy_gradient_small", total_steps=1500, eval_interval=500, seeds=(1,))
    rep = train(doorkey8, dk8_subs, "procedure", cfg)
    assert len(rep.runs[0].success) == 3
    assert rep.runs[0].min_subtask_reward >= 0.0


def test_evaluate_expert_and_random(doorkey8, dk8_subs):
    assert evaluate(ExpertPolicy(doorkey8), doorkey8, dk8_subs, "mrbt", 10) == 1.0
    assert evaluate(RandomPolicy(), doorkey8, dk8_subs, "mrbt", 3) <= 1.0


def test_policy_io_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_policy(tmp_path / "missing.pkl")
    with pytest.raises(TypeError):
        save_policy(RandomPolicy(), tmp_path / "r.pkl")
    import pickle

    (tmp_path / "x.pkl").write_bytes(pickle.dumps({"a": 1}))
    with pytest.raises(ValueError):
        load_policy(tmp_path / "x.pkl")


def test_expert_drop_key_plan(doorkey8, rng):
    s, task = doorkey8.sample_episode(rng)
    plan = expert_actions(doorkey8, s, task, drop_key=True)
    assert DROP in plan
