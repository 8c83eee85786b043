"""Deterministic per-purpose seed derivation from a single base seed.

Every stochastic choice in a run (weight init per stage, shuffle per epoch,
subset selection) derives its own stream from (base_seed, purpose tags) via
a stable hash, so streams never alias and whole runs replay bit-identically
from one integer.
"""

import hashlib

import numpy as np


def derive_seed(base_seed, *tags):
    digest = hashlib.sha256(repr((int(base_seed),) + tags).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(base_seed, *tags):
    return np.random.default_rng(np.random.SeedSequence(derive_seed(base_seed, *tags)))
