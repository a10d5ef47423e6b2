"""Navigation metrics over executed trajectories.

Success is mode dependent: ``r2r`` and ``ndh`` count a stop within the
success radius of the goal, ``reverie`` counts a stop whose panorama shows
the target object category. Aggregates use ``math.fsum`` so they do not
depend on the order of the trajectory log.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import RngStream
from .world import Episode, House, candidates, initial_state, shortest_distance, step_state, STOP

MODES = ("r2r", "reverie", "ndh")
SUCCESS_RADIUS = 3.0
METRIC_KEYS = ("TL", "NE", "SR", "SPL", "OSR", "GP", "RGS", "RGSPL")


@dataclass
class TrajectoryRecord:
    episode_id: str
    path: list[int]
    mode: str = "r2r"
    hop_lengths: list[float] = field(default_factory=list)

    @property
    def stop(self) -> int:
        return self.path[-1]

    def to_dict(self) -> dict:
        return {"episode_id": self.episode_id, "path": list(self.path), "mode": self.mode,
                "hop_lengths": list(self.hop_lengths), "stop": self.stop}

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryRecord":
        return cls(d["episode_id"], list(d["path"]), d.get("mode", "r2r"), list(d.get("hop_lengths", [])))


def make_trajectory(house: House, episode_id: str, path: list[int], mode: str = "r2r") -> TrajectoryRecord:
    hops = [house.edge_length(a, b) for a, b in zip(path[:-1], path[1:])]
    return TrajectoryRecord(episode_id, list(path), mode, hops)


@dataclass
class MetricsReport:
    mode: str
    aggregate: dict[str, float]
    per_episode: list[dict]

    def to_dict(self) -> dict:
        return {"mode": self.mode, "num_episodes": len(self.per_episode), "aggregate": self.aggregate,
                "per_episode": self.per_episode}

    def __getitem__(self, key):
        return self.aggregate[key]


def episode_metrics(house: House, episode: Episode, path: list[int], mode: str,
                    radius: float = SUCCESS_RADIUS) -> dict:
    nb = house.neighbors
    for a, b in zip(path[:-1], path[1:]):
        if b not in nb[a]:
            raise ValueError(f"{episode.episode_id}: hop {a}->{b} is not an edge of {house.house_id}")
    if path[0] != episode.start:
        raise ValueError(f"{episode.episode_id}: trajectory starts at {path[0]}, episode at {episode.start}")
    length = math.fsum(house.edge_length(a, b) for a, b in zip(path[:-1], path[1:]))
    d0 = shortest_distance(house, episode.start, episode.goal)
    stop = path[-1]
    ne = shortest_distance(house, stop, episode.goal)
    seen_at_stop = episode.target_category in house.panorama_categories(stop)
    if mode == "reverie":
        success = seen_at_stop
        oracle = any(episode.target_category in house.panorama_categories(v) for v in path)
    else:
        success = ne < radius
        oracle = min(shortest_distance(house, v, episode.goal) for v in path) < radius
    weight = d0 / max(d0, length) if max(d0, length) > 0 else 1.0
    return {
        "episode_id": episode.episode_id,
        "TL": length,
        "NE": ne,
        "SR": float(success),
        "SPL": float(success) * weight,
        "OSR": float(oracle),
        "GP": d0 - ne,
        "RGS": float(seen_at_stop),
        "RGSPL": float(seen_at_stop) * weight,
    }


def evaluate(trajectories: list[TrajectoryRecord], houses: dict[str, House], episodes: dict[str, Episode],
             mode: str | None = None, radius: float = SUCCESS_RADIUS) -> MetricsReport:
    """Aggregate metrics; ``mode`` overrides the per-record task mode."""
    if mode is not None and mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    rows = []
    seen = set()
    for tr in trajectories:
        if tr.episode_id not in episodes:
            raise KeyError(f"trajectory for unknown episode {tr.episode_id}")
        if tr.episode_id in seen:
            raise ValueError(f"duplicate trajectory for {tr.episode_id}")
        seen.add(tr.episode_id)
        ep = episodes[tr.episode_id]
        rows.append(episode_metrics(houses[ep.house_id], ep, tr.path, mode or tr.mode, radius))
    rows.sort(key=lambda r: r["episode_id"])
    n = len(rows)
    agg = {k: (math.fsum(r[k] for r in rows) / n if n else 0.0) for k in METRIC_KEYS}
    used = mode or (trajectories[0].mode if trajectories else "r2r")
    return MetricsReport(used, agg, rows)


def floyd_warshall(house: House) -> np.ndarray:
    n = house.num_viewpoints
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for a, b in house.edges:
        w = house.edge_length(a, b)
        d[a, b] = d[b, a] = min(d[a, b], w)
    for k in range(n):
        d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
    return d


def oracle_check(houses, tol: float = 1e-6) -> tuple[bool, list[tuple[str, int, int, float, float]]]:
    """Compare production shortest paths against Floyd-Warshall for every pair."""
    mismatches = []
    for house in houses:
        if house.num_viewpoints > 200:
            raise ValueError(f"{house.house_id}: oracle check limited to 200 viewpoints")
        if not house.is_connected():
            raise ValueError(f"{house.house_id}: graph is disconnected")
        ref = floyd_warshall(house)
        got = house.distances
        bad = np.argwhere(np.abs(ref - got) > tol)
        mismatches += [(house.house_id, int(a), int(b), float(got[a, b]), float(ref[a, b])) for a, b in bad]
    return not mismatches, mismatches


def random_walk_baseline(house: House, episode: Episode, max_steps: int, n_samples: int = 1000,
                         seed: int = 0, radius: float = SUCCESS_RADIUS) -> dict[str, float]:
    """Monte-Carlo SR/GP of a policy choosing uniformly among candidates (incl. stop)."""
    rng = RngStream(seed, "random-walk", episode.episode_id)
    d0 = shortest_distance(house, episode.start, episode.goal)
    succ = gp = 0.0
    for _ in range(n_samples):
        state = initial_state(episode)
        for _ in range(max_steps):
            cands = candidates(house, state)
            c = cands[int(rng.integers(len(cands)))]
            if c.target == STOP:
                break
            state = step_state(house, state, c)
        ne = shortest_distance(house, state.viewpoint, episode.goal)
        succ += ne < radius
        gp += d0 - ne
    return {"SR": succ / n_samples, "GP": gp / n_samples}


# ---------------------------------------------------------------- files


def write_trajectories(path, records: list[TrajectoryRecord]):
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(r.to_dict()) + "\n")


def read_trajectories(path) -> list[TrajectoryRecord]:
    with open(path) as f:
        return [TrajectoryRecord.from_dict(json.loads(line)) for line in f if line.strip()]


def write_report(path, report: MetricsReport):
    Path(path).write_text(json.dumps(report.to_dict(), indent=1))
