"""Named random substreams derived from one master seed.

Every consumer of randomness asks for ``stream(seed, "name", idx...)``.
Streams with different names are statistically independent, so changing
how many draws one consumer makes never shifts another consumer's draws.
"""
from __future__ import annotations

import zlib

import numpy as np

SEED_MAX = 2**64 - 1


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream(seed, *names) -> np.random.Generator:
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(_key(n) for n in names))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(seed, *names) -> int:
    """A derived 64-bit seed, for handing to APIs that take a plain seed."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(_key(n) for n in names))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
