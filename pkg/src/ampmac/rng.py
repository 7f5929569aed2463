'''
Deterministic random streams.

Every stochastic routine in this package takes an explicit integer seed and
derives independent substreams from (seed, path) with a counter-based
generator (Philox). Results therefore never depend on call order, chunking,
or the thread count.
'''

import zlib

import numpy as np


def _as_key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    part = int(part)
    assert part >= 0, 'stream path parts must be non-negative'
    return part


def stream(seed, *path):
    '''
    Independent Generator for (seed, *path). Same arguments, same stream.
    Path parts may be non-negative ints or short string tags.
    '''
    seed = int(seed)
    assert seed >= 0, 'seed must be a non-negative integer'
    ss = np.random.SeedSequence(entropy=seed,
                                spawn_key=tuple(_as_key(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
