"""Split construction and on-disk world bundles.

A world bundle is a directory holding ``worlds.world.json`` plus one
``<split>.episodes.json`` per split. Unseen-split houses are generated
separately and never contribute training episodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .rng import RngStream
from .training import Task
from .world import (Episode, House, Vocabulary, build_vocabulary, generate_house, load_episodes, load_world,
                    sample_episode, save_episodes, save_world)

SPLITS = ("train", "val_seen", "val_unseen")
WORLD_FILE = "worlds.world.json"


def episodes_file(split: str) -> str:
    return f"{split.replace('_', '-')}.episodes.json"


@dataclass
class WorldBundle:
    houses: dict[str, House]
    vocab: Vocabulary
    splits: dict[str, list[Episode]] = field(default_factory=dict)

    def tasks(self, split: str) -> list[Task]:
        if split not in self.splits:
            raise KeyError(f"unknown split {split!r}; have {sorted(self.splits)}")
        return [Task(self.houses[e.house_id], e) for e in self.splits[split]]

    def episode(self, episode_id: str) -> Episode:
        for eps in self.splits.values():
            for e in eps:
                if e.episode_id == episode_id:
                    return e
        raise KeyError(episode_id)


def build_bundle(run) -> WorldBundle:
    """Generate houses and split episodes for a RunConfig."""
    wc, sc = run.world, run.splits
    wc.validate()
    sc.validate()
    vocab = build_vocabulary(wc.room_taxonomy_size)
    n_train, n_unseen = sc.num_train_houses, sc.num_unseen_houses
    seeds = RngStream(run.seed, "house-seeds").integers(0, 2**31 - 1, size=n_train + n_unseen)
    houses = {}
    for i, s in enumerate(seeds):
        hid = f"train-{i:03d}" if i < n_train else f"unseen-{i - n_train:03d}"
        houses[hid] = generate_house(int(s), wc, house_id=hid)
    ep_rng = RngStream(run.seed, "episode-seeds")
    splits: dict[str, list[Episode]] = {s: [] for s in SPLITS}
    plan = [("train", "train", sc.train_episodes_per_house), ("val_seen", "train", sc.val_seen_episodes_per_house),
            ("val_unseen", "unseen", sc.val_unseen_episodes_per_house)]
    for split, kind, per_house in plan:
        for hid, house in houses.items():
            if not hid.startswith(kind):
                continue
            for k in range(per_house):
                seed = int(ep_rng.integers(0, 2**31 - 1))
                eid = f"{hid}-{split}-{k:03d}"
                splits[split].append(sample_episode(house, seed, wc, eid, vocab))
    return WorldBundle(houses, vocab, splits)


def save_bundle(out_dir, bundle: WorldBundle, world_config=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_world(out / WORLD_FILE, list(bundle.houses.values()), bundle.vocab, world_config)
    for split, eps in bundle.splits.items():
        save_episodes(out / episodes_file(split), eps, split)


def load_bundle(in_dir) -> WorldBundle:
    src = Path(in_dir)
    if not (src / WORLD_FILE).exists():
        raise FileNotFoundError(f"{src / WORLD_FILE} not found")
    houses, vocab = load_world(src / WORLD_FILE)
    splits = {}
    for split in SPLITS:
        p = src / episodes_file(split)
        if p.exists():
            splits[split] = load_episodes(p)
    return WorldBundle({h.house_id: h for h in houses}, vocab, splits)
