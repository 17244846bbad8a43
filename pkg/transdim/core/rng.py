"""
Random streams for replicate chains.

Every replicate draws from its own Philox stream. Philox is counter based, so
stream ``r`` is the base stream (keyed by the run seed) advanced by ``r`` jumps
of 2**128 draws; streams never overlap and do not depend on how replicates are
scheduled across workers.
"""

from typing import List

import numpy as np

_KEY_MASK = (1 << 64) - 1


def _base_bit_generator(seed: int) -> np.random.Philox:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.Philox(key=int(seed) & _KEY_MASK)


def replicate_generator(seed: int, replicate: int) -> np.random.Generator:
    """
    Return the generator for one replicate chain.

    Args:
        seed: Run seed (64-bit, non-negative).
        replicate: Zero-based replicate number.

    Returns:
        A numpy Generator over the replicate's Philox sub-stream.
    """
    if replicate < 0:
        raise ValueError(f"replicate must be non-negative, got {replicate}")
    bit_generator = _base_bit_generator(seed)
    if replicate:
        bit_generator = bit_generator.jumped(replicate)
    return np.random.Generator(bit_generator)


def replicate_seeds(seed: int, replicates: int) -> List[int]:
    """
    Describe the sub-stream of each replicate as a single integer.

    The value is the first 64-bit word of each stream; it only serves as a
    fingerprint in run summaries (distinct streams give distinct words).
    """
    return [
        int(replicate_generator(seed, r).integers(0, _KEY_MASK, dtype=np.uint64, endpoint=True))
        for r in range(replicates)
    ]
