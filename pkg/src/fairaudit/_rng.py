"""Single source of randomness for every module.

All seeded draws go through numpy's PCG64 bit generator. Its stream is
specified (128-bit LCG state, XSL-RR output permutation, multiplier
0x2360ed051fc65da44385df649fccf645, default increment derived from the seed
via SeedSequence) and is identical across platforms, so a seed names one
exact sequence everywhere.
"""

import numpy as np

RNG_NAME = "numpy.random.PCG64"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))
