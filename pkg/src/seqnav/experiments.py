"""Scaled-down learning experiments shared by scripts/ and the acceptance tests."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .config import RunConfig, SplitConfig
from .data import build_bundle
from .metrics import random_walk_baseline
from .model import ORIST
from .training import Task, TrainConfig, Trainer, evaluate_model, teacher_accuracy
from .world import WorldConfig, build_vocabulary, generate_house, sample_episode

logger = logging.getLogger(__name__)

VARIANTS = ("full", "no_lstm", "no_direction_loss")


# ---------------------------------------------------------------- overfit


@dataclass
class OverfitResult:
    steps: int
    accuracy: float
    sr: float
    seconds: float
    passed: bool


def overfit(seed: int = 0, num_episodes: int = 8, max_updates: int = 2000, check_every: int = 25,
            acc_target: float = 0.95, sr_target: float = 0.90, house_seed: int = 3) -> OverfitResult:
    """Train on a handful of episodes from one house until both targets hold."""
    wc = WorldConfig()
    house = generate_house(house_seed, wc, house_id="overfit-house")
    vocab = build_vocabulary(wc.room_taxonomy_size)
    tasks = [Task(house, sample_episode(house, 1000 * seed + k, wc, vocab=vocab)) for k in range(num_episodes)]
    model = ORIST(RunConfig().model_for(len(vocab)), seed=seed)
    cfg = TrainConfig(seed=seed, batch_size=num_episodes)
    trainer = Trainer(model, cfg, tasks)
    t0 = time.perf_counter()
    acc = sr = 0.0
    for step in range(1, max_updates + 1):
        trainer.train_step(tasks)
        if step % check_every and step != max_updates:
            continue
        acc = teacher_accuracy(model, tasks, cfg)
        sr = evaluate_model(model, tasks, cfg)[0]["SR"]
        logger.info("overfit step %d: teacher acc %.3f, SR %.3f", step, acc, sr)
        if acc >= acc_target and sr >= sr_target:
            return OverfitResult(step, acc, sr, time.perf_counter() - t0, True)
    return OverfitResult(max_updates, acc, sr, time.perf_counter() - t0, False)


# ---------------------------------------------------------------- generalization


def experiment_config(seed: int, epochs: int = 25) -> RunConfig:
    """20 training houses, 5 unseen houses with a larger evaluation pool."""
    splits = SplitConfig(num_train_houses=20, num_unseen_houses=5, train_episodes_per_house=16,
                         val_seen_episodes_per_house=0, val_unseen_episodes_per_house=40)
    return RunConfig(seed=seed, splits=splits, train=dataclasses.replace(TrainConfig(), seed=seed, epochs=epochs))


def variant_configs(run: RunConfig, variant: str, vocab_size: int):
    model = run.model_for(vocab_size)
    train = run.train
    if variant == "no_lstm":
        model = dataclasses.replace(model, temporal=False)
    elif variant == "no_direction_loss":
        train = dataclasses.replace(train, use_direction_loss=False)
    elif variant != "full":
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return model, train


@dataclass
class GeneralizationResult:
    seed: int
    variant: str
    sr: float
    gp: float
    spl: float
    train_sr_curve: list
    seconds: float


def train_and_eval(seed: int, variant: str = "full", epochs: int = 25, bundle=None) -> GeneralizationResult:
    run = experiment_config(seed, epochs)
    bundle = bundle or build_bundle(run)
    mcfg, tcfg = variant_configs(run, variant, len(bundle.vocab))
    model = ORIST(mcfg, seed=seed)
    trainer = Trainer(model, tcfg, bundle.tasks("train"))
    t0 = time.perf_counter()
    curve = []
    while trainer.epoch < tcfg.epochs:
        rec = trainer.run_epoch()
        curve.append(round(rec["acc"], 4))
        logger.info("seed %d %s epoch %d: acc %.3f L_IL %.3f", seed, variant, rec["epoch"], rec["acc"], rec["L_IL"])
    report, _ = evaluate_model(model, bundle.tasks("val_unseen"), tcfg, run.mode)
    return GeneralizationResult(seed, variant, report["SR"], report["GP"], report["SPL"], curve,
                                time.perf_counter() - t0)


def random_walk_split(tasks, max_steps: int, n_samples: int = 1000, seed: int = 0) -> dict[str, float]:
    """Mean Monte-Carlo random-walk SR/GP over a list of tasks."""
    rows = [random_walk_baseline(t.house, t.episode, max_steps, n_samples, seed) for t in tasks]
    return {"SR": math.fsum(r["SR"] for r in rows) / len(rows), "GP": math.fsum(r["GP"] for r in rows) / len(rows)}


def generalization_suite(seeds=(0, 1, 2), variants=VARIANTS, epochs: int = 25) -> dict:
    """Train every (seed, variant) pair; returns results plus random-walk baselines."""
    out = {"runs": [], "baseline": {}}
    for seed in seeds:
        run = experiment_config(seed, epochs)
        bundle = build_bundle(run)
        out["baseline"][seed] = random_walk_split(bundle.tasks("val_unseen"), run.train.max_steps, 1000, seed)
        for v in variants:
            res = train_and_eval(seed, v, epochs, bundle)
            logger.info("seed %d %s: unseen SR %.3f GP %.3f (%.0fs)", seed, v, res.sr, res.gp, res.seconds)
            out["runs"].append(res)
    return out


def summarize(results: dict) -> list[dict]:
    rows = []
    for r in results["runs"]:
        base = results["baseline"][r.seed]
        rows.append({"seed": r.seed, "variant": r.variant, "SR": r.sr, "GP": r.gp, "SPL": r.spl,
                     "rw_SR": base["SR"], "rw_GP": base["GP"], "seconds": round(r.seconds, 1)})
    return rows


def sr_table(results: dict) -> dict[int, dict[str, float]]:
    table: dict[int, dict[str, float]] = {}
    for r in results["runs"]:
        table.setdefault(r.seed, {})[r.variant] = r.sr
    return table


def mean_sr(results: dict, variant: str) -> float:
    return float(np.mean([r.sr for r in results["runs"] if r.variant == variant]))
