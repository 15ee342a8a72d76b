"""Seeded random streams.

All randomness goes through numpy's ``PCG64`` bit generator seeded by a
``SeedSequence``. Independent substreams are addressed by a spawn key, so a
stream depends only on ``(seed, key)`` and never on how many other streams
were drawn before it. This is what makes parallel tree construction produce
the same model as sequential construction.
"""

import numpy as np

ALGORITHM = "numpy.PCG64/SeedSequence"

_MASK64 = (1 << 64) - 1


def make_rng(seed, *key):
    """Return a ``Generator`` for substream ``key`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, *key):
    """Derive a 64-bit integer seed for substream ``key`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
