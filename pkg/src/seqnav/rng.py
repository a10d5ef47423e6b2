"""Seeded random streams.

All randomness goes through numpy's PCG64 bit generator. Child streams are
derived from a parent seed plus string/int keys so that, e.g., house 3 of a
run is the same whether or not houses 0-2 were generated first.
"""

from __future__ import annotations

import hashlib

import numpy as np

ALGORITHM = "numpy.PCG64"


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    digest = hashlib.sha256(str(key).encode()).digest()
    return int.from_bytes(digest[:4], "little")


class RngStream:
    def __init__(self, seed: int, *keys):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.keys = keys
        entropy = [self.seed & 0xFFFFFFFF, self.seed >> 32] + [_key_to_int(k) for k in keys]
        self.gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    algorithm = ALGORITHM

    def child(self, *keys) -> "RngStream":
        return RngStream(self.seed, *self.keys, *keys)

    def __getattr__(self, item):
        # uniform, normal, integers, choice, permutation, ...
        if item == "gen":
            raise AttributeError(item)
        return getattr(self.gen, item)
