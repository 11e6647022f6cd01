"""Seed handling.

Every random draw in the package goes through a Philox counter-based
generator. Independent streams (graph edges, initial states, weights,
k-means restarts, sweep tasks) get their own key, derived from a master
seed with :func:`derive_seed`:

    key = mix64(master ^ mix64(tag_1 + GOLDEN)) folded over all tags

where ``mix64`` is the SplitMix64 finalizer (Steele, Lea & Flood 2014)
and ``GOLDEN = 0x9E3779B97F4A7C15``. The finalizer is a bijection on
64-bit words with good avalanche, so distinct (master, tags) tuples give
unrelated keys and results do not depend on task scheduling order.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# stream tags
GRAPH = 1
STATE = 2
WEIGHTS = 3
KMEANS = 4
SPECTRAL = 5
TRAIN = 6
TASK = 7


def mix64(z: int) -> int:
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *tags: int) -> int:
    s = int(master) & MASK64
    for tag in tags:
        s = mix64(s ^ mix64((int(tag) + GOLDEN) & MASK64))
    return s


def generator(seed: int, *tags: int) -> np.random.Generator:
    """Philox generator keyed by ``derive_seed(seed, *tags)``."""
    return np.random.Generator(np.random.Philox(key=derive_seed(seed, *tags)))
