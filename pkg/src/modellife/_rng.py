"""Seeded random streams.

All randomness comes from numpy's PCG64 generator.  Each purpose gets its own
substream derived from the scenario seed through a fixed spawn key, so adding
draws for one purpose never shifts another.
"""

import numpy as np

STREAMS = {
    "noise": 1,
    "excitation": 2,
}


def stream(seed, purpose, *extra):
    key = (STREAMS[purpose],) + tuple(int(e) for e in extra)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))
