import zlib

import numpy as np


def substream(seed, name, *counters):
    """Independent generator for the named sub-stream of a user seed.

    Streams only depend on ``(seed, name, counters)``, so each stage is
    reproducible on its own.
    """
    if seed is None:
        raise ValueError("a seed is required for stochastic operations")
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode())]
    key.extend(int(c) for c in counters)
    return np.random.default_rng(key)
