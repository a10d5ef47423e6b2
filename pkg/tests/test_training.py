import dataclasses
import math

import numpy as np
import pytest

from seqnav import autograd as ag
from seqnav.autograd import Tensor
from seqnav.gradcheck import END_TO_END_TOL, check_sampled
from seqnav.model import ORIST, ModelConfig
from seqnav.rng import RngStream
from seqnav.training import (NumericalFailure, RolloutRecord, Task, TrainConfig, Trainer, a2c_loss, advantages,
                             combine_imitation, discounted_returns, evaluate_model, imitation_loss,
                             policy_rollout, reward, rl_loss, teacher_accuracy, teacher_forced_rollout, total_loss)
from seqnav.world import WorldConfig, generate_house, sample_episode

CFG = TrainConfig()


@pytest.fixture(scope="module")
def tasks(house, vocab):
    return [Task(house, sample_episode(house, s, vocab=vocab)) for s in range(4)]


def small_model(vocab, **kw):
    return ORIST(ModelConfig(vocab_size=len(vocab), object_feature_dim=64, **kw), seed=0)


# ---------------------------------------------------------------- rewards and returns


def test_reward_schedule():
    assert reward(5.0, 4.0, False) == 1.0
    assert reward(4.0, 5.0, False) == -1.0
    assert reward(4.0, 4.0, False) == -1.0  # no progress is not progress
    assert reward(3.5, 2.9, True) == 2.0
    assert reward(2.0, 3.1, True) == -2.0
    assert reward(2.0, 3.0, True) == -2.0  # strictly inside the radius


def test_reward_telescoping(house, vocab):
    ep = sample_episode(house, 1, vocab=vocab)
    d = [house.distances[v, ep.goal] for v in ep.path]
    steps = [reward(a, b, False) for a, b in zip(d[:-1], d[1:])]
    assert steps == [1.0] * (len(ep.path) - 1)


def test_discounted_returns():
    assert discounted_returns([2.0], 1.0).tolist() == [2.0]
    np.testing.assert_allclose(discounted_returns([1.0, 2.0], 0.9), [2.8, 2.0])


def record(rewards, values, logits=None):
    rec = RolloutRecord("e")
    for k, (r, z) in enumerate(zip(rewards, values)):
        rec.actions.append(0)
        rec.probs.append(0.5)
        rec.teacher_actions.append(0)
        rec.rewards.append(r)
        lg = logits[k] if logits is not None else Tensor(0.0, requires_grad=True)
        rec.logp.append(lg)
        rec.values.append(z if isinstance(z, Tensor) else Tensor(z, requires_grad=True))
    return rec


def test_a2c_value_equals_return_gives_zero_loss():
    returns = discounted_returns([1.0, -1.0, 2.0], 0.9)
    lp = [Tensor(-0.3, requires_grad=True) for _ in returns]
    rec = record([1.0, -1.0, 2.0], list(returns), lp)
    pol, val = a2c_loss(rec, 0.9)
    assert abs(float(val.data)) < 1e-10 and abs(float(pol.data)) < 1e-6
    np.testing.assert_allclose(advantages(rec, 0.9), 0.0, atol=1e-6)


def test_a2c_rejects_empty_and_ragged():
    with pytest.raises(ValueError, match="empty"):
        a2c_loss(RolloutRecord("e"), 0.9)
    rec = record([1.0], [0.0])
    rec.rewards.append(1.0)
    with pytest.raises(ValueError, match="ragged"):
        a2c_loss(rec, 0.9)


def test_advantage_is_a_constant_for_the_policy():
    """Changing the baseline's parameters moves the value loss, not the policy gradient direction rule."""
    logp = Tensor(-0.5, requires_grad=True)
    w = Tensor(0.7, requires_grad=True)  # value-head weight
    z = w * 2.0
    rec = record([1.0], [z], [logp])
    pol, val = a2c_loss(rec, 0.9)
    ag.backward(pol)
    # d(policy)/d(logp) = -(R - Z); no gradient reaches the value weight through the policy term
    assert logp.grad == pytest.approx(-(1.0 - 1.4))
    assert w.grad == 0.0
    ag.backward(val)
    assert w.grad == pytest.approx(2 * (1.4 - 1.0) * 2.0)


def test_total_loss_arithmetic():
    assert total_loss(1.0, 5.0, 0.2) == pytest.approx(2.0)
    assert total_loss(1.5, 5.0, 0.0) == 1.5


def test_total_loss_gradient_is_sum_of_components(f64):
    rng = np.random.default_rng(0)
    w = Tensor(rng.normal(size=3), requires_grad=True)
    rl = lambda: ag.sum(ag.square(w))  # noqa: E731
    il = lambda: ag.sum(ag.tanh(w) * 3.0)  # noqa: E731
    ag.backward(total_loss(rl(), il(), 0.2))
    g_total = w.grad.copy()
    w.zero_grad()
    ag.backward(rl())
    g_rl = w.grad.copy()
    w.zero_grad()
    ag.backward(il())
    np.testing.assert_allclose(g_total, g_rl + 0.2 * w.grad, rtol=1e-12)


# ---------------------------------------------------------------- imitation


def parts(**vals):
    base = dict(D=1.0, Rn=1.0, Rg=1.0, a=1.0, p=1.0)
    base.update(vals)
    return {k: Tensor(v) for k, v in base.items()}


@pytest.mark.parametrize("c", [0.0, 1.0, 2.5, 10.0])
def test_lambda_weighting(c):
    zero = float(combine_imitation(parts(Rn=0.0), CFG).data)
    assert float(combine_imitation(parts(Rn=c), CFG).data) - zero == pytest.approx(0.2 * c, rel=1e-6)
    zero = float(combine_imitation(parts(Rg=0.0), CFG).data)
    assert float(combine_imitation(parts(Rg=c), CFG).data) - zero == pytest.approx(0.2 * c, rel=1e-6)
    zero = float(combine_imitation(parts(a=0.0), CFG).data)
    assert float(combine_imitation(parts(a=c), CFG).data) - zero == pytest.approx(c, rel=1e-6)


def test_ablation_switches_drop_terms():
    no_d = dataclasses.replace(CFG, use_direction_loss=False)
    assert float(combine_imitation(parts(D=7.0), no_d).data) == float(combine_imitation(parts(D=0.0), CFG).data)


def test_imitation_loss_sums_steps_and_averages_episodes():
    steps = [parts(), parts(a=3.0)]
    assert float(imitation_loss(steps, CFG, num_episodes=2).data) == pytest.approx((3.4 + 5.4) / 2)


def test_uniform_heads_match_closed_form(house, vocab):
    model = small_model(vocab)
    for k in model.params:
        if k.startswith("head.") and ".l2." in k:
            model.params[k].data[:] = 0
    ep = sample_episode(house, 2, WorldConfig(min_path_len=1, max_path_len=1), vocab=vocab)
    loss, comps, _, total = teacher_forced_rollout(model, [Task(house, ep)], CFG)
    g = [len(house.neighbors[v]) + 1 for v in ep.path]  # candidates at the move step and at the stop step
    per_step = [math.log(4) + 0.2 * math.log(8) + 0.2 * math.log(8) + math.log(n) + math.log(2) for n in g]
    assert total == 2
    assert float(loss.data) == pytest.approx(sum(per_step), rel=1e-5)
    assert comps["a"] == pytest.approx(sum(math.log(n) for n in g), rel=1e-5)
    assert comps["D"] == pytest.approx(2 * math.log(4), rel=1e-5)


def test_confident_correct_predictions_give_near_zero_loss():
    logits = np.full((3, 4), -10.0)
    logits[np.arange(3), [0, 2, 1]] = 10.0
    assert float(ag.cross_entropy(Tensor(logits), [0, 2, 1]).data) <= 1e-6
    with pytest.raises(ValueError):
        ag.cross_entropy(Tensor(logits), [0, 2, 4])


# ---------------------------------------------------------------- rollouts


def test_policy_rollout_terminates(tasks, vocab):
    model = small_model(vocab)
    cfg = dataclasses.replace(CFG, max_steps=3)
    recs = policy_rollout(model, tasks, cfg, RngStream(0, "t"))
    for rec in recs:
        rec.check()
        assert 1 <= len(rec.actions) <= 3 and rec.terminal
        assert len(rec.path) == 1 + sum(a != -1 for a in rec.actions) or len(rec.path) <= 4


def test_forced_replay_reproduces_sampled_rollout(tasks, vocab):
    model = small_model(vocab)
    recs = policy_rollout(model, tasks, CFG, RngStream(5, "t"))
    again = policy_rollout(model, tasks, CFG, forced=[r.actions for r in recs])
    assert [r.path for r in recs] == [r.path for r in again]
    assert float(rl_loss(recs, CFG).data) == pytest.approx(float(rl_loss(again, CFG).data), rel=1e-6)


def test_end_to_end_gradient(f64, tasks, vocab):
    model = ORIST(ModelConfig(vocab_size=len(vocab), object_feature_dim=64, d_h=16, n_heads=2, init_std=0.3), seed=2)
    sub = tasks[:2]
    recs = policy_rollout(model, sub, CFG, RngStream(1, "fd"))
    actions = [r.actions for r in recs]
    adv = [advantages(r, CFG.gamma) for r in recs]

    def loss():
        il = teacher_forced_rollout(model, sub, CFG)[0]
        rl = rl_loss(policy_rollout(model, sub, CFG, forced=actions), CFG, adv)
        return total_loss(rl, il, CFG.lambda3)

    err, _ = check_sampled(loss, model.params, 20, np.random.default_rng(0))
    assert err < END_TO_END_TOL


def test_all_parameters_get_finite_gradients(tasks, vocab):
    model = small_model(vocab)
    loss = teacher_forced_rollout(model, tasks, CFG)[0]
    ag.backward(loss)
    for name, p in model.params.items():
        assert np.all(np.isfinite(p.grad)), name
    used = [k for k, p in model.params.items() if np.any(p.grad != 0)]
    assert "head.value.w" not in used  # the critic is trained only by the value loss
    assert len(used) >= len(model.params) - 3


# ---------------------------------------------------------------- trainer


def test_lr_zero_leaves_metrics_unchanged(tasks, vocab):
    model = small_model(vocab)
    cfg = dataclasses.replace(CFG, lr=0.0, weight_decay=0.0, batch_size=2)
    before = evaluate_model(model, tasks, cfg)[0].to_dict()
    Trainer(model, cfg, tasks).run_epoch()
    assert evaluate_model(model, tasks, cfg)[0].to_dict() == before


def test_training_deterministic(tasks, vocab):
    def curve():
        model = small_model(vocab)
        tr = Trainer(model, dataclasses.replace(CFG, batch_size=2), tasks)
        return [tr.train_step(tasks[:2]) for _ in range(3)], model.params["lstm.wx"].data.tobytes()

    assert curve() == curve()


def test_losses_finite_on_standard_worlds(vocab):
    from seqnav.config import RunConfig, SplitConfig
    from seqnav.data import build_bundle

    run = RunConfig(splits=SplitConfig(num_train_houses=3, num_unseen_houses=1, train_episodes_per_house=4,
                                       val_seen_episodes_per_house=0, val_unseen_episodes_per_house=0))
    bundle = build_bundle(run)
    model = ORIST(run.model_for(len(bundle.vocab)))
    tr = Trainer(model, run.train, bundle.tasks("train"))
    rec = tr.run_epoch()
    assert all(math.isfinite(v) for k, v in rec.items() if isinstance(v, float))
    assert tr.skipped == 0


def test_numerical_failure_after_consecutive_skips(tasks, vocab):
    model = small_model(vocab)
    model.params["head.act.l2.b"].data[:] = np.nan
    tr = Trainer(model, dataclasses.replace(CFG, max_consecutive_skips=3), tasks)
    for _ in range(2):
        tr.train_step(tasks[:1])
    with pytest.raises(NumericalFailure):
        tr.train_step(tasks[:1])
    assert tr.skipped == 3 and tr.updates == 0


def test_single_episode_overfit(house, vocab):
    model = ORIST(ModelConfig(vocab_size=len(vocab), object_feature_dim=64, d_h=32, n_heads=4), seed=0)
    task = [Task(house, sample_episode(house, 3, vocab=vocab))]
    cfg = dataclasses.replace(CFG, batch_size=1)
    tr = Trainer(model, cfg, task)
    acc = 0.0
    for step in range(1, 501):
        tr.train_step(task)
        if step % 25 == 0:
            acc = teacher_accuracy(model, task, cfg)
            if acc == 1.0:
                break
    assert acc == 1.0


def test_config_validation():
    with pytest.raises(ValueError, match="gamma"):
        TrainConfig(gamma=0.0).validate()
    with pytest.raises(ValueError, match="lambda1"):
        TrainConfig(lambda1=0.0).validate()
    with pytest.raises(ValueError, match="max_steps"):
        TrainConfig(max_steps=0).validate()
    assert TrainConfig.from_dict(TrainConfig().to_dict()) == TrainConfig()
