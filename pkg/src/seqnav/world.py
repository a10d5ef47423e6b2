"""Procedural graph-world: houses, episodes, observations and teacher labels.

Houses are grown on a jittered square lattice so that moves between
neighbours are roughly axis-aligned, which makes the four relative
direction bins meaningful. Headings follow the usual panorama convention:
0 rad faces +y and angles increase clockwise, so a positive relative
heading means "to the right".
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import RngStream

NUM_VIEWS = 36
HEADINGS_PER_ELEVATION = 12

FRONT, RIGHT, BACK, LEFT = 0, 1, 2, 3
DIRECTION_NAMES = ("FRONT", "RIGHT", "BACK", "LEFT")
DIRECTION_PHRASES = {
    FRONT: ("go", "forward"),
    RIGHT: ("turn", "right"),
    BACK: ("turn", "around"),
    LEFT: ("turn", "left"),
}
DIRECTION_WORDS = {"forward": FRONT, "right": RIGHT, "around": BACK, "left": LEFT}

ROOM_TYPES = (
    "living_room",
    "bedroom",
    "kitchen",
    "bathroom",
    "hallway",
    "office",
    "dining_room",
    "laundry",
)
ROOM_OBJECTS = {
    "living_room": ("couch", "tv", "fireplace", "coffee_table"),
    "bedroom": ("bed", "wardrobe", "nightstand", "dresser"),
    "kitchen": ("oven", "microwave", "fridge", "stove"),
    "bathroom": ("sink", "toilet", "bathtub", "shower"),
    "hallway": ("coat_rack", "shoe_rack", "bench", "stairs"),
    "office": ("desk", "computer", "bookshelf", "printer"),
    "dining_room": ("dining_table", "chair", "chandelier", "cabinet"),
    "laundry": ("washer", "dryer", "ironing_board", "basket"),
}
GENERIC_OBJECTS = ("door", "window", "lamp", "picture", "plant", "rug", "clock", "mirror")
TEMPLATE_WORDS = (
    "exit", "in", "the", "go", "forward", "turn", "left", "right",
    "around", "past", "into", "stop", "near",
)  # fmt: skip
SPECIAL_TOKENS = ("[PAD]", "[CLS]", "[SEP]")
PAD, CLS, SEP = 0, 1, 2

CARDINAL_VIEWS = tuple(HEADINGS_PER_ELEVATION + k for k in (0, 3, 6, 9))
STOP = -1


@dataclass(frozen=True)
class WorldConfig:
    num_viewpoints: int = 20
    num_rooms: int = 4
    room_taxonomy_size: int = 8
    objects_per_view: int = 3
    object_feature_dim: int = 64
    edge_density: float = 0.3
    spacing: float = 3.5
    jitter: float = 0.3
    height_jitter: float = 0.2
    object_noise: float = 0.05
    characteristic_prob: float = 0.75
    min_path_len: int = 2
    max_path_len: int = 4
    landmark_prob: float = 0.5

    def validate(self):
        if self.num_viewpoints < 2:
            raise ValueError("num_viewpoints: must be >= 2")
        if self.room_taxonomy_size < 1:
            raise ValueError("room_taxonomy_size: taxonomy must be nonempty")
        if self.num_rooms < 1:
            raise ValueError("num_rooms: must be >= 1")
        if self.objects_per_view < 1:
            raise ValueError("objects_per_view: must be >= 1 (every viewpoint needs an object)")
        if self.object_feature_dim < 1:
            raise ValueError("object_feature_dim: must be >= 1")
        if not 0.0 <= self.edge_density <= 1.0:
            raise ValueError("edge_density: must lie in [0, 1]")
        if not 1 <= self.min_path_len <= self.max_path_len:
            raise ValueError("min_path_len/max_path_len: need 1 <= min <= max")


# ---------------------------------------------------------------- vocabulary


@dataclass(frozen=True)
class Vocabulary:
    room_types: tuple[str, ...]
    categories: tuple[str, ...]
    room_categories: tuple[tuple[int, ...], ...]  # characteristic category ids per room type
    generic_categories: tuple[int, ...]
    tokens: tuple[str, ...]

    def __len__(self):
        return len(self.tokens)

    @property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tokens)}

    def encode(self, words) -> list[int]:
        idx = self.index
        return [idx[w] for w in words]

    def decode(self, ids) -> list[str]:
        return [self.tokens[i] for i in ids]

    def to_dict(self) -> dict:
        return {
            "room_types": list(self.room_types),
            "categories": list(self.categories),
            "room_categories": [list(c) for c in self.room_categories],
            "generic_categories": list(self.generic_categories),
            "tokens": list(self.tokens),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(
            tuple(d["room_types"]),
            tuple(d["categories"]),
            tuple(tuple(c) for c in d["room_categories"]),
            tuple(d["generic_categories"]),
            tuple(d["tokens"]),
        )


def build_vocabulary(room_taxonomy_size: int = 8) -> Vocabulary:
    rooms = [ROOM_TYPES[i] if i < len(ROOM_TYPES) else f"room_{i}" for i in range(room_taxonomy_size)]
    categories: list[str] = []
    room_cats = []
    for r in rooms:
        names = ROOM_OBJECTS.get(r, tuple(f"{r}_object_{j}" for j in range(4)))
        room_cats.append(tuple(range(len(categories), len(categories) + len(names))))
        categories.extend(names)
    generic = tuple(range(len(categories), len(categories) + len(GENERIC_OBJECTS)))
    categories.extend(GENERIC_OBJECTS)
    tokens = list(SPECIAL_TOKENS) + list(TEMPLATE_WORDS) + rooms + categories
    return Vocabulary(tuple(rooms), tuple(categories), tuple(room_cats), generic, tuple(tokens))


def category_prototypes(num_categories: int, dim: int) -> np.ndarray:
    """Fixed random unit vectors, one per object category (shared by all houses)."""
    rng = RngStream(0, "category-prototypes", dim)
    protos = rng.normal(size=(num_categories, dim))
    return protos / np.linalg.norm(protos, axis=1, keepdims=True)


# ---------------------------------------------------------------- geometry


def bearing(src: np.ndarray, dst: np.ndarray) -> float:
    """Absolute heading (radians, clockwise from +y) from src to dst."""
    return math.atan2(dst[0] - src[0], dst[1] - src[1])


def elevation(src: np.ndarray, dst: np.ndarray) -> float:
    horiz = math.hypot(dst[0] - src[0], dst[1] - src[1])
    return math.atan2(dst[2] - src[2], horiz)


def heading_index(heading: float) -> int:
    deg = math.degrees(heading) % 360.0
    return int(math.floor((deg + 15.0) / 30.0)) % HEADINGS_PER_ELEVATION


def elevation_index(phi: float) -> int:
    deg = math.degrees(phi)
    if deg < -15.0:
        return 0
    if deg > 15.0:
        return 2
    return 1


def view_index(heading: float, phi: float = 0.0) -> int:
    """Panorama slot in [0, 36): elevation level * 12 + heading slot."""
    return elevation_index(phi) * HEADINGS_PER_ELEVATION + heading_index(heading)


def direction_bin(theta_deg: float) -> int:
    """Quarter of the circle a relative heading (degrees) falls in."""
    t = theta_deg % 360.0
    if t >= 315.0 or t < 45.0:
        return FRONT
    if t < 135.0:
        return RIGHT
    if t < 225.0:
        return BACK
    return LEFT


def orientation_feature(theta: float, phi: float) -> np.ndarray:
    return np.array([math.sin(theta), math.cos(theta), math.sin(phi), math.cos(phi)])


# ---------------------------------------------------------------- house


@dataclass
class House:
    house_id: str
    positions: np.ndarray  # (V, 3) meters
    edges: list[tuple[int, int]]
    rooms: np.ndarray  # (V,) room-type index
    regions: np.ndarray  # (V,) room instance index
    obj_viewpoint: np.ndarray
    obj_view: np.ndarray
    obj_category: np.ndarray
    obj_feature: np.ndarray  # (n, F) float32
    obj_pos: np.ndarray  # (n, 7) float32
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_viewpoints(self) -> int:
        return len(self.positions)

    @property
    def neighbors(self) -> list[list[int]]:
        nb = self._cache.get("neighbors")
        if nb is None:
            nb = [[] for _ in range(self.num_viewpoints)]
            for a, b in self.edges:
                nb[a].append(b)
                nb[b].append(a)
            nb = [sorted(x) for x in nb]
            self._cache["neighbors"] = nb
        return nb

    def edge_length(self, a: int, b: int) -> float:
        return float(np.linalg.norm(self.positions[a] - self.positions[b]))

    @property
    def distances(self) -> np.ndarray:
        d = self._cache.get("distances")
        if d is None:
            d = np.stack([dijkstra(self, s) for s in range(self.num_viewpoints)])
            self._cache["distances"] = d
        return d

    def view_objects(self, viewpoint: int, view: int) -> np.ndarray:
        table = self._cache.get("view_objects")
        if table is None:
            table = {}
            for i, (vp, vw) in enumerate(zip(self.obj_viewpoint.tolist(), self.obj_view.tolist())):
                table.setdefault((vp, vw), []).append(i)
            table = {k: np.array(v, dtype=np.int64) for k, v in table.items()}
            self._cache["view_objects"] = table
        return table.get((viewpoint, view), np.zeros(0, dtype=np.int64))

    def panorama_categories(self, viewpoint: int) -> set[int]:
        return set(self.obj_category[self.obj_viewpoint == viewpoint].tolist())

    def is_connected(self) -> bool:
        seen = {0}
        frontier = [0]
        while frontier:
            v = frontier.pop()
            for u in self.neighbors[v]:
                if u not in seen:
                    seen.add(u)
                    frontier.append(u)
        return len(seen) == self.num_viewpoints

    def to_dict(self) -> dict:
        objects = [
            {
                "viewpoint": int(self.obj_viewpoint[i]),
                "view": int(self.obj_view[i]),
                "category": int(self.obj_category[i]),
                "feature": [round(float(x), 5) for x in self.obj_feature[i]],
                "position": [round(float(x), 5) for x in self.obj_pos[i]],
            }
            for i in range(len(self.obj_category))
        ]
        return {
            "house_id": self.house_id,
            "viewpoints": [
                {"id": i, "position": [float(x) for x in self.positions[i]], "room": int(self.rooms[i]),
                 "region": int(self.regions[i])}
                for i in range(self.num_viewpoints)
            ],
            "edges": [[int(a), int(b)] for a, b in self.edges],
            "objects": objects,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "House":
        vps = sorted(d["viewpoints"], key=lambda v: v["id"])
        objs = d["objects"]
        dim = len(objs[0]["feature"]) if objs else 0
        return cls(
            house_id=d["house_id"],
            positions=np.array([v["position"] for v in vps], dtype=np.float64),
            edges=[(int(a), int(b)) for a, b in d["edges"]],
            rooms=np.array([v["room"] for v in vps], dtype=np.int64),
            regions=np.array([v.get("region", v["room"]) for v in vps], dtype=np.int64),
            obj_viewpoint=np.array([o["viewpoint"] for o in objs], dtype=np.int64),
            obj_view=np.array([o["view"] for o in objs], dtype=np.int64),
            obj_category=np.array([o["category"] for o in objs], dtype=np.int64),
            obj_feature=np.array([o["feature"] for o in objs], dtype=np.float32).reshape(len(objs), dim),
            obj_pos=np.array([o["position"] for o in objs], dtype=np.float32).reshape(len(objs), 7),
        )


def dijkstra(house: House, source: int) -> np.ndarray:
    dist = np.full(house.num_viewpoints, np.inf)
    dist[source] = 0.0
    heap = [(0.0, source)]
    nb = house.neighbors
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for u in nb[v]:
            nd = d + house.edge_length(v, u)
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


def shortest_distance(house: House, a: int, b: int) -> float:
    return float(house.distances[a, b])


def next_hop(house: House, viewpoint: int, goal: int) -> int:
    """Neighbour of ``viewpoint`` on a shortest path to ``goal`` (lowest id on ties)."""
    dist = house.distances[:, goal]
    if not np.isfinite(dist[viewpoint]):
        raise ValueError(f"goal {goal} unreachable from {viewpoint} in house {house.house_id}")
    best, best_d = None, np.inf
    for u in house.neighbors[viewpoint]:
        d = house.edge_length(viewpoint, u) + dist[u]
        if d < best_d - 1e-9:
            best, best_d = u, d
    return best


def shortest_path(house: House, start: int, goal: int) -> list[int]:
    path = [start]
    while path[-1] != goal:
        path.append(next_hop(house, path[-1], goal))
    return path


def generate_house(seed: int, config: WorldConfig = WorldConfig(), house_id: str | None = None) -> House:
    config.validate()
    rng = RngStream(seed, "house")
    house_id = house_id or f"house-{seed}"
    n = config.num_viewpoints

    # grow a connected lattice animal; growth edges form a spanning tree
    cells = [(0, 0)]
    where = {(0, 0): 0}
    edges: set[tuple[int, int]] = set()
    steps = ((1, 0), (-1, 0), (0, 1), (0, -1))
    while len(cells) < n:
        src = int(rng.integers(len(cells)))
        dx, dy = steps[int(rng.integers(4))]
        cell = (cells[src][0] + dx, cells[src][1] + dy)
        if cell in where:
            continue
        where[cell] = len(cells)
        edges.add((src, len(cells)))
        cells.append(cell)
    for i, (cx, cy) in enumerate(cells):
        for dx, dy in ((1, 0), (0, 1)):
            j = where.get((cx + dx, cy + dy))
            if j is not None and (min(i, j), max(i, j)) not in edges and (max(i, j), min(i, j)) not in edges:
                if rng.uniform() < config.edge_density:
                    edges.add((min(i, j), max(i, j)))
    edges_list = sorted((min(a, b), max(a, b)) for a, b in edges)

    xy = np.array(cells, dtype=np.float64) * config.spacing
    xy += rng.uniform(-config.jitter, config.jitter, size=xy.shape)
    z = rng.uniform(-config.height_jitter, config.height_jitter, size=(n, 1))
    positions = np.round(np.concatenate([xy, z], axis=1), 4)

    # rooms: multi-source BFS regions from random seeds, so rooms are contiguous
    nb = [[] for _ in range(n)]
    for a, b in edges_list:
        nb[a].append(b)
        nb[b].append(a)
    num_rooms = min(config.num_rooms, n)
    seeds = [int(s) for s in rng.permutation(n)[:num_rooms]]
    regions = np.full(n, -1, dtype=np.int64)
    frontier = []
    for r, s in enumerate(seeds):
        regions[s] = r
        frontier.append(s)
    while frontier:
        nxt = []
        for v in frontier:
            for u in sorted(nb[v]):
                if regions[u] < 0:
                    regions[u] = regions[v]
                    nxt.append(u)
        frontier = nxt
    tax = config.room_taxonomy_size
    region_types = rng.choice(tax, size=num_rooms, replace=num_rooms > tax)
    rooms = region_types[regions].astype(np.int64)

    vocab = build_vocabulary(tax)
    protos = category_prototypes(len(vocab.categories), config.object_feature_dim)

    obj_vp, obj_view, obj_cat, obj_fea, obj_pos = [], [], [], [], []
    for v in range(n):
        source: dict[int, int] = {}
        for u in sorted(nb[v]):
            vw = view_index(bearing(positions[v], positions[u]), elevation(positions[v], positions[u]))
            source.setdefault(vw, int(rooms[u]))
        for vw in CARDINAL_VIEWS:
            source.setdefault(vw, int(rooms[v]))
        for vw in sorted(source):
            room = source[vw]
            for _ in range(int(rng.integers(1, config.objects_per_view + 1))):
                if rng.uniform() < config.characteristic_prob:
                    cat = vocab.room_categories[room][int(rng.integers(len(vocab.room_categories[room])))]
                else:
                    cat = vocab.generic_categories[int(rng.integers(len(vocab.generic_categories)))]
                x1, y1 = rng.uniform(0.0, 0.7, size=2)
                w, h = rng.uniform(0.1, 0.3, size=2)
                obj_vp.append(v)
                obj_view.append(vw)
                obj_cat.append(cat)
                obj_fea.append(protos[cat] + rng.normal(0.0, config.object_noise, size=protos.shape[1]))
                obj_pos.append([x1, y1, x1 + w, y1 + h, h, w, w * h])

    return House(
        house_id=house_id,
        positions=positions,
        edges=edges_list,
        rooms=rooms,
        regions=regions,
        obj_viewpoint=np.array(obj_vp, dtype=np.int64),
        obj_view=np.array(obj_view, dtype=np.int64),
        obj_category=np.array(obj_cat, dtype=np.int64),
        obj_feature=np.round(np.array(obj_fea), 5).astype(np.float32),
        obj_pos=np.round(np.array(obj_pos), 5).astype(np.float32),
    )


# ---------------------------------------------------------------- episodes


@dataclass
class Episode:
    episode_id: str
    house_id: str
    start: int
    start_heading: float
    goal: int
    target_category: int
    goal_room: int
    instruction: list[int]
    path: list[int]

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "house_id": self.house_id,
            "start": self.start,
            "start_heading": self.start_heading,
            "goal": self.goal,
            "target_category": self.target_category,
            "goal_room": self.goal_room,
            "instruction": list(self.instruction),
            "path": list(self.path),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Episode":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


def path_direction_bins(house: House, path: list[int], start_heading: float) -> list[int]:
    bins = []
    heading = start_heading
    for a, b in zip(path[:-1], path[1:]):
        brg = bearing(house.positions[a], house.positions[b])
        bins.append(direction_bin(math.degrees(brg - heading)))
        heading = brg
    return bins


def instruction_words(house: House, path: list[int], start_heading: float, target: int, vocab: Vocabulary,
                      rng: RngStream, landmark_prob: float) -> list[str]:
    rooms = vocab.room_types
    words = []
    leaves = any(house.regions[v] != house.regions[path[0]] for v in path)
    words += ["exit" if leaves else "in", "the", rooms[house.rooms[path[0]]]]
    bins = path_direction_bins(house, path, start_heading)
    for k, (a, b) in enumerate(zip(path[:-1], path[1:])):
        words += DIRECTION_PHRASES[bins[k]]
        if house.regions[b] != house.regions[a]:
            words += ["into", "the", rooms[house.rooms[b]]]
        if rng.uniform() < landmark_prob:
            pa, pb = house.positions[a], house.positions[b]
            objs = house.view_objects(a, view_index(bearing(pa, pb), elevation(pa, pb)))
            if len(objs):
                cat = int(house.obj_category[objs[int(rng.integers(len(objs)))]])
                words += ["past", "the", vocab.categories[cat]]
    words += ["stop", "in", "the", rooms[house.rooms[path[-1]]], "near", "the", vocab.categories[target]]
    return words


def sample_episode(house: House, seed: int, config: WorldConfig = WorldConfig(), episode_id: str | None = None,
                   vocab: Vocabulary | None = None, max_retries: int = 200) -> Episode:
    vocab = vocab or build_vocabulary(config.room_taxonomy_size)
    rng = RngStream(seed, house.house_id, "episode")
    n = house.num_viewpoints
    for _ in range(max_retries):
        start = int(rng.integers(n))
        goals = [g for g in range(n)
                 if g != start and config.min_path_len <= len(shortest_path(house, start, g)) - 1 <= config.max_path_len]
        if goals:
            break
    else:
        raise ValueError(
            f"no start/goal pair with {config.min_path_len}..{config.max_path_len} hops in {house.house_id}"
        )
    goal = goals[int(rng.integers(len(goals)))]
    path = shortest_path(house, start, goal)
    heading = float(np.round(rng.uniform(0.0, 2 * math.pi), 6))

    room = int(house.rooms[goal])
    present = sorted(house.panorama_categories(goal))
    characteristic = [c for c in present if c in vocab.room_categories[room]]
    pool = characteristic or present
    target = pool[int(rng.integers(len(pool)))]

    words = instruction_words(house, path, heading, target, vocab, rng, config.landmark_prob)
    return Episode(
        episode_id=episode_id or f"{house.house_id}-ep{seed}",
        house_id=house.house_id,
        start=start,
        start_heading=heading,
        goal=goal,
        target_category=int(target),
        goal_room=room,
        instruction=vocab.encode(words),
        path=path,
    )


# ---------------------------------------------------------------- observation


@dataclass
class AgentState:
    viewpoint: int
    heading: float
    step: int = 0


@dataclass
class Candidate:
    target: int  # viewpoint id, or STOP
    theta: float
    phi: float
    orientation: np.ndarray
    obj_feature: np.ndarray
    obj_pos: np.ndarray
    obj_category: np.ndarray


@dataclass
class Observation:
    step: int
    candidates: list[Candidate]
    teacher_action: int
    direction_bins: list[int]
    next_room: int
    goal_room: int
    progress: float

    @property
    def stop_index(self) -> int:
        return len(self.candidates) - 1


def initial_state(episode: Episode) -> AgentState:
    return AgentState(episode.start, episode.start_heading, 0)


def candidates(house: House, state: AgentState) -> list[Candidate]:
    key = (state.viewpoint, state.heading)
    cache = house._cache.setdefault("candidates", {})
    hit = cache.get(key)
    if hit is not None:
        return hit
    v = state.viewpoint
    pv = house.positions[v]
    out = []
    for u in house.neighbors[v]:
        pu = house.positions[u]
        brg = bearing(pv, pu)
        phi = elevation(pv, pu)
        theta = brg - state.heading
        objs = house.view_objects(v, view_index(brg, phi))
        out.append(Candidate(u, theta, phi, orientation_feature(theta, phi), house.obj_feature[objs],
                             house.obj_pos[objs], house.obj_category[objs]))
    objs = house.view_objects(v, view_index(state.heading, 0.0))
    out.append(Candidate(STOP, 0.0, 0.0, orientation_feature(0.0, 0.0), house.obj_feature[objs],
                         house.obj_pos[objs], house.obj_category[objs]))
    cache[key] = out
    return out


def teacher_action(house: House, episode: Episode, state: AgentState) -> int:
    nb = house.neighbors[state.viewpoint]
    if state.viewpoint == episode.goal:
        return len(nb)
    return nb.index(next_hop(house, state.viewpoint, episode.goal))


def teacher_progress(house: House, episode: Episode, state: AgentState) -> float:
    d0 = shortest_distance(house, episode.start, episode.goal)
    if d0 <= 0:
        raise ValueError("teacher_progress: start coincides with goal")
    dt = shortest_distance(house, state.viewpoint, episode.goal)
    return float(min(max(1.0 - dt / d0, 0.0), 1.0))


def observe(house: House, episode: Episode, state: AgentState) -> Observation:
    cands = candidates(house, state)
    act = teacher_action(house, episode, state)
    nxt = state.viewpoint if cands[act].target == STOP else cands[act].target
    return Observation(
        step=state.step,
        candidates=cands,
        teacher_action=act,
        direction_bins=[direction_bin(math.degrees(c.theta)) for c in cands],
        next_room=int(house.rooms[nxt]),
        goal_room=episode.goal_room,
        progress=teacher_progress(house, episode, state),
    )


def step_state(house: House, state: AgentState, cand: Candidate) -> AgentState:
    """Execute a candidate; moving faces the agent along the traversed edge."""
    if cand.target == STOP:
        return AgentState(state.viewpoint, state.heading, state.step + 1)
    brg = bearing(house.positions[state.viewpoint], house.positions[cand.target])
    return AgentState(cand.target, brg, state.step + 1)


# ---------------------------------------------------------------- files


def save_world(path, houses: list[House], vocab: Vocabulary, config: WorldConfig | None = None):
    doc = {
        "format": "seqnav.world",
        "version": 1,
        "vocabulary": vocab.to_dict(),
        "houses": [h.to_dict() for h in houses],
    }
    if config is not None:
        doc["config"] = config.__dict__.copy()
    Path(path).write_text(json.dumps(doc, separators=(",", ":")))


def load_world(path) -> tuple[list[House], Vocabulary]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "seqnav.world":
        raise ValueError(f"{path}: not a world file")
    return [House.from_dict(h) for h in doc["houses"]], Vocabulary.from_dict(doc["vocabulary"])


def save_episodes(path, episodes: list[Episode], split: str):
    doc = {"format": "seqnav.episodes", "version": 1, "split": split, "episodes": [e.to_dict() for e in episodes]}
    Path(path).write_text(json.dumps(doc, indent=1))


def load_episodes(path) -> list[Episode]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "seqnav.episodes":
        raise ValueError(f"{path}: not an episodes file")
    return [Episode.from_dict(e) for e in doc["episodes"]]
