"""Counter-based, splittable random streams.

Every stream is a Philox generator keyed by ``(seed, *spawn_key)``, so
streams never overlap and can be created in any order.
"""
from __future__ import annotations

import numpy as np

WORLD_STREAM = 0
ITEM_STREAM = 1
ALG_STREAM = 2
MISC_STREAM = 3


def substream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
