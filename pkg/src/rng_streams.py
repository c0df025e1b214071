"""
Named random substreams.

Every random draw in a run descends from one 64-bit seed. A substream is
identified by a name plus integer keys (member id, quench, ...), so the
numbers a walker sees do not depend on execution order or thread count.
"""

import zlib
from typing import Optional

import numpy as np


def stream_key(name: str) -> int:
    """Stable integer key for a stream name."""
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: Optional[int], name: str, *keys: int) -> np.random.Generator:
    """Return the generator for stream ``name`` at ``keys`` under ``seed``.

    Args:
        seed: Root seed of the run (None draws fresh OS entropy)
        name: Stream name, e.g. "moves" or "resample"
        *keys: Non-negative integers further identifying the stream

    Returns:
        Independent numpy Generator
    """
    spawn_key = (stream_key(name),) + tuple(int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=spawn_key))


def child_seed(rng: np.random.Generator) -> int:
    """Draw an integer seed for libraries that take ``random_state``."""
    return int(rng.integers(0, 2**31 - 1))


def fresh_seed() -> int:
    """A new root seed from OS entropy, for runs configured without one."""
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])
