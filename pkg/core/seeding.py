"""
Seeded Random Streams
Counter-based generators so every step and clip has its own reproducible stream
"""

import numpy as np

# Stream identifiers keep independent consumers from sharing draws
STREAM_DATA = 0
STREAM_LATENT = 1
STREAM_NOISE = 2
STREAM_INIT = 3
STREAM_PROBE = 4
STREAM_CORPUS = 5


def derive_rng(seed: int, stream: int, *counters: int) -> np.random.Generator:
    """Generator for (seed, stream, counters...), independent of call order"""
    return np.random.default_rng([int(seed), int(stream), *[int(c) for c in counters]])
