"""
Deterministic random streams.

Every random draw in the package descends from a single 64-bit seed. Work
items that may run in any order (sweep entries, angles) get their own
stream by mixing the seed with the item's key through splitmix64, and the
mixed value seeds a numpy PCG64 generator. The same (seed, key) pair always
yields the same stream, whatever the thread schedule.
"""

import hashlib
from typing import Union

import numpy as np

MASK64 = (1 << 64) - 1

Key = Union[int, float, str]


def splitmix64(state: int) -> int:
    """One splitmix64 output for the given 64-bit state."""
    z = (state + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _key_bits(key: Key) -> int:
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)):
        return int(key) & MASK64
    if isinstance(key, (float, np.floating)):
        return int(np.float64(key).view(np.uint64))
    if isinstance(key, str):
        digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"Unsupported stream key type: {type(key).__name__}")


def derive_seed(seed: int, *keys: Key) -> int:
    """
    Mix a root seed with a sequence of keys into a 64-bit child seed.

    Args:
        seed: Root seed (any integer, reduced mod 2**64).
        *keys: Integers, floats or strings naming the stream.

    Returns:
        64-bit integer seed.
    """
    state = splitmix64(int(seed) & MASK64)
    for key in keys:
        state = splitmix64(state ^ _key_bits(key))
    return state


def generator(seed: int, *keys: Key) -> np.random.Generator:
    """numpy Generator (PCG64) for the stream named by keys under seed."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *keys)))
