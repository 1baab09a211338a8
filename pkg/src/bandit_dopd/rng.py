"""Seed derivation.

Every random draw in a run comes from a stream keyed by
``(master_seed, concern, *indices)`` so that results do not depend on the order
in which agents or rounds are evaluated.
"""

import numpy as np

PROBLEM = 1
GRAPH = 2
DIRECTION = 3
INIT = 4
BOUNDS = 5


def stream(seed: int, concern: int, *indices: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, concern, *indices)``."""
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=(concern, *map(int, indices)))
    return np.random.Generator(np.random.PCG64(ss))
