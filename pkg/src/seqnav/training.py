"""Mixed imitation + advantage actor-critic training.

Each update runs two rollouts over the same batch of episodes: one
teacher-forced (imitation losses) and one with actions sampled from the
policy (A2C), and combines them as ``L_RL + lambda3 * L_IL``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .metrics import SUCCESS_RADIUS, evaluate, make_trajectory
from .model import ORIST, make_batch
from .optim import AdamW, clip_grad_norm
from .rng import RngStream
from .world import Episode, House, initial_state, observe, shortest_distance, step_state

logger = logging.getLogger(__name__)


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lambda1: float = 0.2
    lambda2: float = 0.2
    lambda3: float = 0.2
    lr: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    gamma: float = 0.9
    max_steps: int = 8
    batch_size: int = 8
    epochs: int = 10
    seed: int = 0
    success_threshold: float = SUCCESS_RADIUS
    step_reward: float = 1.0
    terminal_reward: float = 2.0
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    clip_norm: float = 5.0
    use_direction_loss: bool = True
    use_room_next_loss: bool = True
    use_room_goal_loss: bool = True
    use_rl: bool = True
    max_consecutive_skips: int = 10
    eval_batch_size: int = 16
    log_wall_time: bool = False

    def validate(self):
        for name in ("lambda1", "lambda2", "lambda3"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name}: must be > 0")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma: must lie in (0, 1]")
        if self.max_steps < 1:
            raise ValueError("max_steps: must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size: must be >= 1")
        if self.lr < 0:
            raise ValueError("lr: must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        kw = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        if "betas" in kw:
            kw["betas"] = tuple(kw["betas"])
        return cls(**kw)


@dataclass
class Task:
    house: House
    episode: Episode


# ---------------------------------------------------------------- rewards and losses


def reward(dist_before: float, dist_after: float, terminal: bool, cfg: TrainConfig = TrainConfig()) -> float:
    """Progress reward while moving; success/failure reward on the last step."""
    if terminal:
        return cfg.terminal_reward if dist_after < cfg.success_threshold else -cfg.terminal_reward
    return cfg.step_reward if dist_before - dist_after > 0 else -cfg.step_reward


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


@dataclass
class RolloutRecord:
    """One sampled episode. ``logp``/``values``/``entropy`` are graph scalars."""

    episode_id: str
    path: list[int] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    probs: list[float] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    teacher_actions: list[int] = field(default_factory=list)
    logp: list[Tensor] = field(default_factory=list)
    values: list[Tensor] = field(default_factory=list)
    entropy: list[Tensor] = field(default_factory=list)
    terminal: bool = False

    def check(self):
        n = len(self.actions)
        lens = {len(self.probs), len(self.rewards), len(self.teacher_actions), len(self.logp), len(self.values)}
        if lens != {n}:
            raise ValueError(f"{self.episode_id}: ragged rollout record")


def _add_all(terms: list[Tensor]) -> Tensor:
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


def advantages(rollout: RolloutRecord, gamma: float) -> np.ndarray:
    returns = discounted_returns(rollout.rewards, gamma)
    return returns - np.array([float(z.data) for z in rollout.values])


def a2c_loss(rollout: RolloutRecord, gamma: float, adv=None) -> tuple[Tensor, Tensor]:
    """Policy term with a constant advantage and squared-error value term.

    ``adv`` overrides the advantages (used to freeze them for gradient checks).
    """
    if not rollout.actions:
        raise ValueError(f"{rollout.episode_id}: empty rollout")
    rollout.check()
    returns = discounted_returns(rollout.rewards, gamma)
    if adv is None:
        adv = advantages(rollout, gamma)
    policy, value = [], []
    for logp, z, ret, a in zip(rollout.logp, rollout.values, returns, adv):
        policy.append(logp * (-float(a)))
        value.append(ag.square(z - ret))
    return _add_all(policy), _add_all(value)


def total_loss(l_rl, l_il, lambda3: float):
    return l_rl + lambda3 * l_il


def imitation_step_losses(out, observations, cfg: TrainConfig) -> dict[str, Tensor]:
    """Per-step imitation terms, each summed over the episodes of the batch."""
    batch = out.batch
    teacher = np.array([o.teacher_action for o in observations])
    G = batch.num_candidates
    if np.any(teacher >= G) or np.any(teacher < 0):
        raise ValueError("imitation loss: teacher action index out of range")
    dir_labels = np.concatenate([o.direction_bins for o in observations])
    dir_weight = 1.0 / G[batch.seg]
    progress = np.array([o.progress for o in observations])
    return {
        "D": ag.cross_entropy(out.direction, dir_labels, weight=dir_weight),
        "Rn": ag.cross_entropy(out.room_next, [o.next_room for o in observations], reduction="sum"),
        "Rg": ag.cross_entropy(out.room_goal, [o.goal_room for o in observations], reduction="sum"),
        "a": ag.cross_entropy(out.action, teacher, mask=batch.cand_mask, reduction="sum"),
        "p": ag.binary_cross_entropy(out.progress, progress, reduction="sum"),
    }


def combine_imitation(parts: dict[str, Tensor], cfg: TrainConfig) -> Tensor:
    """L_D + lambda1 L_Rn + lambda2 L_Rg + L_a + L_p, with ablation switches."""
    total = parts["a"] + parts["p"]
    if cfg.use_direction_loss:
        total = total + parts["D"]
    if cfg.use_room_next_loss:
        total = total + cfg.lambda1 * parts["Rn"]
    if cfg.use_room_goal_loss:
        total = total + cfg.lambda2 * parts["Rg"]
    return total


def imitation_loss(step_parts: list[dict[str, Tensor]], cfg: TrainConfig, num_episodes: int = 1) -> Tensor:
    """Sum the weighted terms over steps; average over episodes."""
    return _add_all([combine_imitation(p, cfg) for p in step_parts]) * (1.0 / num_episodes)


# ---------------------------------------------------------------- rollouts


def _carry(state: Tensor, keep: list[int]) -> Tensor:
    return ag.take(state, np.asarray(keep, dtype=np.int64))


def teacher_forced_rollout(model: ORIST, tasks: list[Task], cfg: TrainConfig):
    """Follow the teacher; returns (L_IL, component sums, correct, total actions)."""
    states = [initial_state(t.episode) for t in tasks]
    active = list(range(len(tasks)))
    h, c = model.initial_state(len(tasks))
    step_parts = []
    correct = total = 0
    while active:
        obs = [observe(tasks[i].house, tasks[i].episode, states[i]) for i in active]
        batch = make_batch([tasks[i].episode.instruction for i in active], obs, model.config)
        out = model.step(batch, h, c)
        step_parts.append(imitation_step_losses(out, obs, cfg))
        pred = np.argmax(out.action.data + batch.cand_mask, axis=1)
        teacher = np.array([o.teacher_action for o in obs])
        correct += int(np.sum(pred == teacher))
        total += len(obs)
        keep = []
        for row, (i, o) in enumerate(zip(active, obs)):
            cand = o.candidates[o.teacher_action]
            if o.teacher_action == o.stop_index:
                continue
            states[i] = step_state(tasks[i].house, states[i], cand)
            keep.append(row)
        active = [active[r] for r in keep]
        if keep:
            h, c = _carry(out.h, keep), _carry(out.c, keep)
    loss = imitation_loss(step_parts, cfg, len(tasks))
    comps = {k: float(np.sum([p[k].data for p in step_parts])) / len(tasks) for k in step_parts[0]}
    return loss, comps, correct, total


def policy_rollout(model: ORIST, tasks: list[Task], cfg: TrainConfig, rng: RngStream | None = None,
                   greedy: bool = False, forced: list[list[int]] | None = None) -> list[RolloutRecord]:
    """Run the policy for up to ``max_steps`` actions per episode.

    With ``greedy`` the argmax action is taken; otherwise actions are drawn
    from the softmax over candidate logits using ``rng``. ``forced`` replays
    given per-episode action lists instead.
    """
    n = len(tasks)
    records = [RolloutRecord(t.episode.episode_id, path=[t.episode.start]) for t in tasks]
    states = [initial_state(t.episode) for t in tasks]
    active = list(range(n))
    h, c = model.initial_state(n)
    for t in range(cfg.max_steps):
        if not active:
            break
        obs = [observe(tasks[i].house, tasks[i].episode, states[i]) for i in active]
        batch = make_batch([tasks[i].episode.instruction for i in active], obs, model.config)
        out = model.step(batch, h, c)
        logits = out.action.data.astype(np.float64) + batch.cand_mask
        probs = np.exp(logits - logits.max(axis=1, keepdims=True))
        probs /= probs.sum(axis=1, keepdims=True)
        if not np.all(np.isfinite(probs)):
            raise FloatingPointError("policy_rollout: non-finite action probabilities")
        if forced is not None:
            actions = np.array([forced[i][t] for i in active])
        elif greedy:
            actions = np.argmax(logits, axis=1)
        else:
            actions = np.array([int(rng.choice(len(p), p=p)) for p in probs])
        track = ag.grad_enabled() and not greedy
        if track:
            logp_all = ag.log_softmax(out.action, batch.cand_mask)
            width = logp_all.shape[1]
            chosen = ag.take(ag.reshape(logp_all, (-1,)), np.arange(len(active)) * width + actions)
            if cfg.entropy_coef:
                ent = ag.sum(ag.exp(logp_all) * logp_all * -1.0, axis=1)
        keep = []
        for row, i in enumerate(active):
            task, rec, o = tasks[i], records[i], obs[row]
            a = int(actions[row])
            cand = o.candidates[a]
            before = shortest_distance(task.house, states[i].viewpoint, task.episode.goal)
            stopped = a == o.stop_index
            if not stopped:
                states[i] = step_state(task.house, states[i], cand)
                rec.path.append(states[i].viewpoint)
            after = shortest_distance(task.house, states[i].viewpoint, task.episode.goal)
            terminal = stopped or t == cfg.max_steps - 1
            rec.actions.append(a)
            rec.probs.append(float(probs[row, a]))
            rec.teacher_actions.append(o.teacher_action)
            rec.rewards.append(reward(before, after, terminal, cfg))
            if track:
                rec.logp.append(chosen[row])
                rec.values.append(out.value[row])
                if cfg.entropy_coef:
                    rec.entropy.append(ent[row])
            else:
                rec.logp.append(Tensor(np.log(probs[row, a])))
                rec.values.append(Tensor(out.value.data[row]))
            if terminal:
                rec.terminal = True
            else:
                keep.append(row)
        active = [active[r] for r in keep]
        if keep:
            h, c = _carry(out.h, keep), _carry(out.c, keep)
    return records


def rl_loss(records: list[RolloutRecord], cfg: TrainConfig, adv=None) -> Tensor:
    """Per-episode A2C terms summed, divided by the number of sampled steps."""
    terms = []
    for k, rec in enumerate(records):
        pol, val = a2c_loss(rec, cfg.gamma, None if adv is None else adv[k])
        term = pol + cfg.value_coef * val
        if cfg.entropy_coef and rec.entropy:
            term = term - cfg.entropy_coef * _add_all(rec.entropy)
        terms.append(term)
    steps = sum(len(rec.actions) for rec in records)
    return _add_all(terms) * (1.0 / steps)


def greedy_trajectories(model: ORIST, tasks: list[Task], cfg: TrainConfig, mode: str = "r2r"):
    out = []
    with ag.no_grad():
        for k in range(0, len(tasks), cfg.eval_batch_size):
            chunk = tasks[k : k + cfg.eval_batch_size]
            for t, rec in zip(chunk, policy_rollout(model, chunk, cfg, greedy=True)):
                out.append(make_trajectory(t.house, t.episode.episode_id, rec.path, mode))
    return out


def evaluate_model(model: ORIST, tasks: list[Task], cfg: TrainConfig, mode: str = "r2r"):
    trajs = greedy_trajectories(model, tasks, cfg, mode)
    houses = {t.house.house_id: t.house for t in tasks}
    episodes = {t.episode.episode_id: t.episode for t in tasks}
    return evaluate(trajs, houses, episodes, mode, cfg.success_threshold), trajs


def teacher_accuracy(model: ORIST, tasks: list[Task], cfg: TrainConfig) -> float:
    correct = total = 0
    with ag.no_grad():
        for k in range(0, len(tasks), cfg.eval_batch_size):
            _, _, c, n = teacher_forced_rollout(model, tasks[k : k + cfg.eval_batch_size], cfg)
            correct += c
            total += n
    return correct / max(total, 1)


# ---------------------------------------------------------------- trainer


class Trainer:
    def __init__(self, model: ORIST, cfg: TrainConfig, train_tasks: list[Task], val_tasks=None, mode: str = "r2r"):
        cfg.validate()
        self.model = model
        self.cfg = cfg
        self.train_tasks = train_tasks
        self.val_tasks = val_tasks or []
        self.mode = mode
        self.opt = AdamW(model.params, cfg.lr, cfg.betas, cfg.eps, cfg.weight_decay)
        self.rng = RngStream(cfg.seed, "train")
        self.epoch = 0
        self.updates = 0
        self.consecutive_skips = 0
        self.skipped = 0
        self.clipped = 0

    def train_step(self, tasks: list[Task]) -> dict:
        cfg = self.cfg
        self.opt.zero_grad()
        l_il, comps, correct, total = teacher_forced_rollout(self.model, tasks, cfg)
        stats = {"loss": math.nan, "L_IL": float(l_il.data), "L_RL": math.nan,
                 "acc": correct / max(total, 1), **{f"L_{k}": v for k, v in comps.items()}}
        if not math.isfinite(stats["L_IL"]):
            self._skip("non-finite imitation loss")
            return stats
        if cfg.use_rl:
            try:
                records = policy_rollout(self.model, tasks, cfg, self.rng.child("rollout", self.updates))
            except FloatingPointError as e:
                self._skip(str(e))
                return stats
            l_rl = rl_loss(records, cfg)
        else:
            l_rl = Tensor(0.0)
        loss = total_loss(l_rl, l_il, cfg.lambda3)
        stats["loss"], stats["L_RL"] = float(loss.data), float(l_rl.data)
        if not math.isfinite(stats["loss"]):
            self._skip("non-finite loss")
            return stats
        ag.backward(loss)
        norm = clip_grad_norm(self.model.params, cfg.clip_norm)
        if cfg.clip_norm and norm > cfg.clip_norm:
            self.clipped += 1
        if not self.opt.step():
            self._skip("non-finite gradient")
            return stats
        self.consecutive_skips = 0
        self.updates += 1
        return stats

    def _skip(self, why: str):
        self.skipped += 1
        self.consecutive_skips += 1
        logger.warning("update skipped (%s); %d in a row", why, self.consecutive_skips)
        if self.consecutive_skips >= self.cfg.max_consecutive_skips:
            raise NumericalFailure(f"{self.consecutive_skips} consecutive non-finite updates")

    def run_epoch(self) -> dict:
        t0 = time.perf_counter()
        cfg = self.cfg
        order = self.rng.child("epoch", self.epoch).permutation(len(self.train_tasks))
        sums: dict[str, float] = {}
        nb = 0
        for k in range(0, len(order), cfg.batch_size):
            stats = self.train_step([self.train_tasks[i] for i in order[k : k + cfg.batch_size]])
            for key, v in stats.items():
                sums[key] = sums.get(key, 0.0) + v
            nb += 1
        record = {"epoch": self.epoch}
        record.update({k: v / max(nb, 1) for k, v in sums.items()})
        record.update({"val_SR": None, "val_SPL": None, "val_GP": None})
        if self.val_tasks:
            try:
                report, _ = evaluate_model(self.model, self.val_tasks, cfg, self.mode)
                record.update({"val_SR": report["SR"], "val_SPL": report["SPL"], "val_GP": report["GP"]})
            except FloatingPointError as e:
                # diverged parameters; the skip counter decides whether to abort
                logger.warning("validation skipped (%s)", e)
        record["updates"] = self.updates
        record["wall_time_s"] = time.perf_counter() - t0 if cfg.log_wall_time else None
        self.epoch += 1
        return record


def train(model: ORIST, cfg: TrainConfig, train_tasks: list[Task], val_tasks=None, mode: str = "r2r",
          trainer: Trainer | None = None, on_epoch=None) -> tuple[ORIST, list[dict]]:
    trainer = trainer or Trainer(model, cfg, train_tasks, val_tasks, mode)
    log = []
    while trainer.epoch < cfg.epochs:
        rec = trainer.run_epoch()
        log.append(rec)
        if on_epoch is not None:
            on_epoch(rec, trainer)
    return trainer.model, log
