"""Named random substreams derived from one root seed.

Every stochastic stage draws from ``substream(seed, name)`` so that, e.g., the
split can be reproduced without replaying data generation.
"""

import zlib

import numpy as np

STREAMS = ("data", "init", "split", "search")


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    key = (zlib.crc32(name.encode("utf-8")),) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def child_seed(seed: int, name: str, *extra: int) -> int:
    """A 63-bit integer seed for components that take plain ints."""
    return int(substream(seed, name, *extra).integers(0, 2**63 - 1))
