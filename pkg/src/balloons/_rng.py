"""Named, reproducible random streams.

Every consumer of randomness asks for a stream keyed by ``(seed, tag, *index)``.
Streams with different tags are statistically independent, so adding a new
consumer never shifts the numbers drawn by an existing one.
"""

import zlib

import numpy as np


def _tag_key(tag):
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed, tag, *index):
    """Return a fresh ``numpy.random.Generator`` for ``(seed, tag, *index)``."""
    key = (_tag_key(tag),) + tuple(int(i) & 0xFFFFFFFF for i in index)
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def task_seed(master, task, index=0):
    """Stable 63-bit seed derived from a master seed and a task name."""
    ss = np.random.SeedSequence(entropy=int(master) & (2**64 - 1),
                                spawn_key=(_tag_key(task), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
