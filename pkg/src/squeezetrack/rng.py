"""Seeded, counter-based random streams.

Every stochastic operation takes an integer ``seed`` plus an optional stream
path of up to three non-negative integers.  The stream is a Philox4x64
generator keyed by ``seed`` whose 256-bit counter starts at
``[0, path[0], path[1], path[2]]``.  Draws advance only the lowest counter
word, so distinct paths never overlap (each owns 2**64 blocks).  The harness
derives per-replicate streams this way, which makes results independent of
how work is split across processes.
"""

import numpy as np

from squeezetrack.errors import DomainError

GENERATOR_NAME = "Philox4x64-10"
NORMAL_METHOD = "ziggurat"

_MAX_PATH = 3


def make_rng(seed, *path):
    """Return a ``numpy.random.Generator`` for ``seed`` and stream ``path``."""
    seed = int(seed)
    if seed < 0 or seed >= 2**128:
        raise DomainError(f"seed must be in [0, 2**128), got {seed}")
    if len(path) > _MAX_PATH:
        raise DomainError(f"stream path has at most {_MAX_PATH} levels, got {len(path)}")
    words = [0, 0, 0, 0]
    for i, p in enumerate(path):
        p = int(p)
        if p < 0 or p >= 2**64:
            raise DomainError(f"stream index out of range: {p}")
        words[i + 1] = p
    return np.random.Generator(np.random.Philox(key=seed, counter=words))


def rng_metadata(seed, *path):
    """Metadata describing how a stream was produced."""
    return {
        "generator": GENERATOR_NAME,
        "normal_method": NORMAL_METHOD,
        "seed": int(seed),
        "stream": [int(p) for p in path],
    }
