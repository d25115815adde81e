"""Named random sub-generators derived from one integer seed."""

import zlib

import numpy as np


def rng_for(seed, name, *extra):
    """Independent generator for stream ``name`` (``shuffle``, ``dropout``, ...).

    Streams are keyed by a CRC of the name, so adding a stream never shifts
    the draws of an existing one.
    """
    key = [int(seed), zlib.crc32(name.encode("utf-8")), *(int(x) for x in extra)]
    return np.random.default_rng(np.random.SeedSequence(key))
