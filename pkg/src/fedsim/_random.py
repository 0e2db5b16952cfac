"""Deterministic per-purpose random streams derived from one root seed."""

import zlib

import numpy as np


def _key(part):
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def rng_for(seed, *purpose):
    """Return a Generator keyed by ``(seed, *purpose)``.

    Streams for different purposes are statistically independent and do
    not depend on the order in which they are requested, so drawing from
    one never shifts another (e.g. adding a client does not perturb the
    edge sampling of the graph generator).
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(p) for p in purpose))
    return np.random.Generator(np.random.PCG64(ss))
