"""Hand-built houses for geometry oracles."""

import numpy as np

from seqnav.world import House


def make_house(positions, edges, rooms=None, house_id="hand", feature_dim=64):
    """One object per viewpoint in the horizon view facing +y (slot 12)."""
    pos = np.asarray(positions, dtype=np.float64)
    n = len(pos)
    rooms = np.zeros(n, dtype=np.int64) if rooms is None else np.asarray(rooms, dtype=np.int64)
    return House(
        house_id=house_id,
        positions=pos,
        edges=[tuple(sorted(e)) for e in edges],
        rooms=rooms,
        regions=rooms.copy(),
        obj_viewpoint=np.arange(n),
        obj_view=np.full(n, 12),
        obj_category=np.zeros(n, dtype=np.int64),
        obj_feature=np.ones((n, feature_dim), dtype=np.float32) / np.sqrt(feature_dim),
        obj_pos=np.zeros((n, 7), dtype=np.float32),
    )


def random_observation(rng, num_candidates, max_objects=4, feature_dim=64, min_objects=0):
    """Observation with random candidates; teacher labels are placeholders."""
    from seqnav.world import Candidate, Observation, orientation_feature

    cands = []
    for g in range(num_candidates):
        n = int(rng.integers(min_objects, max_objects + 1))
        theta, phi = rng.uniform(-np.pi, np.pi), rng.uniform(-0.5, 0.5)
        cands.append(Candidate(
            target=g,
            theta=theta,
            phi=phi,
            orientation=orientation_feature(theta, phi),
            obj_feature=rng.normal(size=(n, feature_dim)).astype(np.float32),
            obj_pos=rng.uniform(size=(n, 7)).astype(np.float32),
            obj_category=rng.integers(40, size=n),
        ))
    return Observation(step=0, candidates=cands, teacher_action=0, direction_bins=[0] * num_candidates,
                       next_room=0, goal_room=0, progress=0.0)


def random_instruction(rng, vocab_size=64, max_len=12):
    return rng.integers(3, vocab_size, size=int(rng.integers(1, max_len + 1))).tolist()
