"""Command-line entry point: gen-world, train, eval, dump-attention.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import autograd as ag
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_run_config
from .data import WorldBundle, build_bundle, load_bundle, save_bundle
from .metrics import MODES, evaluate, write_report, write_trajectories
from .model import ORIST, make_batch
from .training import NumericalFailure, TrainConfig, Trainer, greedy_trajectories
from .world import initial_state, observe, step_state

logger = logging.getLogger("seqnav")

CHECKPOINT = "checkpoint.orst"
TRAIN_LOG = "train_log.jsonl"
RUN_CONFIG = "run_config.json"


class UsageError(Exception):
    """Bad input files or arguments (exit code 2)."""


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True)


def _log_line(rec: dict) -> str:
    # strict JSON: non-finite values (skipped updates) become null
    clean = {k: None if isinstance(v, float) and not math.isfinite(v) else v for k, v in rec.items()}
    return json.dumps(clean, sort_keys=True, allow_nan=False)


def _resumable(run_dict: dict) -> dict:
    """Run config minus the epoch budget, which a resumed run may extend."""
    return {**run_dict, "train": {k: v for k, v in run_dict.get("train", {}).items() if k != "epochs"}}


def _load_worlds(path) -> WorldBundle:
    try:
        return load_bundle(path)
    except FileNotFoundError as e:
        raise UsageError(str(e)) from None
    except (ValueError, KeyError) as e:
        raise UsageError(f"{path}: unreadable world bundle ({e})") from None


def _load_ckpt(path):
    if not Path(path).exists():
        raise UsageError(f"{path}: checkpoint not found")
    try:
        return load_checkpoint(path)
    except ValueError as e:
        raise UsageError(str(e)) from None


def check_compatible(model_cfg, bundle: WorldBundle) -> list[str]:
    """Fields where the model disagrees with the world bundle."""
    some = next(iter(bundle.houses.values()))
    world = {
        "vocab_size": len(bundle.vocab),
        "room_taxonomy_size": len(bundle.vocab.room_types),
        "object_feature_dim": int(some.obj_feature.shape[-1]),
    }
    return [f"{k}: checkpoint {getattr(model_cfg, k)} != worlds {v}" for k, v in world.items()
            if getattr(model_cfg, k) != v]


def num_threads() -> int:
    raw = os.environ.get("SEQNAV_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"SEQNAV_THREADS: expected an integer, got {raw!r}") from None
    return max(1, n)


# ---------------------------------------------------------------- commands


def cmd_gen_world(args) -> int:
    run = load_run_config(args.config)
    bundle = build_bundle(run)
    out = Path(args.out)
    save_bundle(out, bundle, run.world)
    (out / RUN_CONFIG).write_text(_dump(run.to_dict()))
    counts = {k: len(v) for k, v in bundle.splits.items()}
    logger.info("wrote %d houses, episodes %s to %s", len(bundle.houses), counts, out)
    return 0


def _train_config(run: RunConfig) -> TrainConfig:
    return dataclasses.replace(run.train, seed=run.seed)


def cmd_train(args) -> int:
    run = load_run_config(args.config)
    bundle = _load_worlds(args.worlds)
    if not bundle.splits.get("train"):
        raise UsageError(f"{args.worlds}: no training episodes")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tcfg = _train_config(run)
    val = bundle.tasks("val_seen") if bundle.splits.get("val_seen") else []

    if args.resume:
        model, meta, opt_state = _load_ckpt(args.resume)
        bad = check_compatible(model.config, bundle)
        if bad:
            raise UsageError("checkpoint/worlds mismatch: " + "; ".join(bad))
        if _resumable(meta.get("run_config", {})) != _resumable(run.to_dict()):
            raise UsageError(f"{args.resume}: checkpoint was trained with a different run config")
    else:
        model = ORIST(run.model_for(len(bundle.vocab)), seed=run.seed)
        meta, opt_state = {}, None
    bad = check_compatible(model.config, bundle)
    if bad:
        raise UsageError("config/worlds mismatch: " + "; ".join(bad))

    trainer = Trainer(model, tcfg, bundle.tasks("train"), val, run.mode)
    if opt_state is not None:
        trainer.opt.state = opt_state
        trainer.epoch = int(meta.get("epoch", 0))
        trainer.updates = int(meta.get("updates", 0))
        trainer.skipped = int(meta.get("skipped", 0))

    log_path = out / TRAIN_LOG
    mode = "a" if args.resume else "w"
    worlds = str(Path(args.worlds).resolve())
    with open(log_path, mode) as log:
        while trainer.epoch < tcfg.epochs:
            rec = trainer.run_epoch()
            log.write(_log_line(rec) + "\n")
            log.flush()
            ckpt_meta = {"epoch": trainer.epoch, "updates": trainer.updates, "skipped": trainer.skipped,
                         "run_config": run.to_dict(), "worlds": worlds}
            save_checkpoint(out / CHECKPOINT, model, ckpt_meta, trainer.opt.state)
            logger.info("epoch %d  L_IL %.3f  L_RL %.3f  val SR %s", rec["epoch"], rec["L_IL"], rec["L_RL"],
                        rec["val_SR"])
    if not (out / CHECKPOINT).exists():
        # nothing left to train (resume of a finished run) - still leave a checkpoint behind
        save_checkpoint(out / CHECKPOINT, model, {**meta, "worlds": worlds}, trainer.opt.state)
    return 0


def _eval_config(meta: dict) -> TrainConfig:
    if "run_config" in meta:
        return TrainConfig.from_dict(meta["run_config"].get("train", {}))
    return TrainConfig()


def _parallel_trajectories(model, tasks, cfg, mode, threads):
    if threads <= 1 or len(tasks) <= cfg.eval_batch_size:
        return greedy_trajectories(model, tasks, cfg, mode)
    chunks = [tasks[k : k + cfg.eval_batch_size] for k in range(0, len(tasks), cfg.eval_batch_size)]
    # the grad switch is process-global; hold it off here so workers never flip it back on
    with ag.no_grad(), ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda ch: greedy_trajectories(model, ch, cfg, mode), chunks))
    return [t for part in parts for t in part]


def cmd_eval(args) -> int:
    model, meta, _ = _load_ckpt(args.checkpoint)
    bundle = _load_worlds(args.worlds)
    bad = check_compatible(model.config, bundle)
    if bad:
        raise UsageError("checkpoint/worlds mismatch: " + "; ".join(bad))
    split = args.split.replace("-", "_")
    if split not in bundle.splits:
        raise UsageError(f"--split: {args.split!r} not in worlds (have {sorted(bundle.splits)})")
    tasks = bundle.tasks(split)
    if not tasks:
        raise UsageError(f"--split: {args.split!r} has no episodes")
    cfg = _eval_config(meta)
    trajs = _parallel_trajectories(model, tasks, cfg, args.mode, num_threads())
    episodes = {t.episode.episode_id: t.episode for t in tasks}
    report = evaluate(trajs, bundle.houses, episodes, args.mode, cfg.success_threshold)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_report(out, report)
    write_trajectories(out.with_name(out.stem + ".trajectories.jsonl"), trajs)
    logger.info("%s/%s: SR %.3f SPL %.3f", split, args.mode, report["SR"], report["SPL"])
    return 0


def attention_dump(model: ORIST, bundle: WorldBundle, episode_id: str, max_steps: int) -> dict:
    """Greedy rollout recording, per step, the chosen candidate's attention maps."""
    try:
        ep = bundle.episode(episode_id)
    except KeyError:
        raise UsageError(f"--episode: {episode_id!r} not found in worlds") from None
    house = bundle.houses[ep.house_id]
    state = initial_state(ep)
    h, c = model.initial_state(1)
    L = len(ep.instruction)
    steps = []
    with ag.no_grad():
        for t in range(max_steps):
            obs = observe(house, ep, state)
            batch = make_batch([ep.instruction], [obs], model.config)
            out = model.step(batch, h, c, record_attention=True)
            logits = out.action.data[0] + batch.cand_mask[0]
            a = int(np.argmax(logits))
            layers = []
            for probs in out.attention:  # (S, heads, C, C)
                layers.append([[[round(float(x), 6) for x in row] for row in probs[a, k, : L + 1]]
                               for k in range(probs.shape[1])])
            steps.append({
                "step": t,
                "viewpoint": state.viewpoint,
                "action": a,
                "stop": a == obs.stop_index,
                "columns": int(batch.seq_len),
                "valid_columns": int(batch.token_counts[a]),
                "attention": layers,
            })
            if a == obs.stop_index:
                break
            state = step_state(house, state, obs.candidates[a])
            h, c = out.h, out.c
    words = bundle.vocab.decode(ep.instruction)
    return {
        "episode_id": episode_id,
        "rows": ["[CLS]", *words],
        "layers": model.config.layers,
        "heads": model.config.n_heads,
        "steps": steps,
    }


def cmd_dump_attention(args) -> int:
    model, meta, _ = _load_ckpt(args.checkpoint)
    worlds = args.worlds or meta.get("worlds")
    if not worlds:
        raise UsageError("--worlds: checkpoint does not record its worlds directory; pass --worlds")
    bundle = _load_worlds(worlds)
    bad = check_compatible(model.config, bundle)
    if bad:
        raise UsageError("checkpoint/worlds mismatch: " + "; ".join(bad))
    doc = attention_dump(model, bundle, args.episode, _eval_config(meta).max_steps)
    Path(args.out).write_text(json.dumps(doc, separators=(",", ":")))
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqnav", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-world", help="generate houses and episode splits")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_world)

    t = sub.add_parser("train", help="mixed imitation + A2C training")
    t.add_argument("--config", required=True)
    t.add_argument("--worlds", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--resume", help="continue from this checkpoint")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="greedy rollouts and metrics on one split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--worlds", required=True)
    e.add_argument("--split", required=True)
    e.add_argument("--mode", required=True, choices=MODES)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("dump-attention", help="export per-step attention maps for one episode")
    d.add_argument("--checkpoint", required=True)
    d.add_argument("--episode", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--worlds", help="worlds directory (default: the one recorded in the checkpoint)")
    d.set_defaults(func=cmd_dump_attention)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericalFailure as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
