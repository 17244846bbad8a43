"""
Tests for transdim.core.rng.
"""

import numpy as np
import pytest

from transdim.core.rng import replicate_generator, replicate_seeds


class TestReplicateStreams:
    """Philox sub-streams per replicate."""

    def test_reproducible(self):
        a = replicate_generator(5, 3).random(4)
        b = replicate_generator(5, 3).random(4)
        assert np.array_equal(a, b)

    def test_replicates_differ(self):
        draws = [replicate_generator(5, r).random() for r in range(4)]
        assert len(set(draws)) == 4

    def test_seeds_differ(self):
        assert replicate_generator(1, 0).random() != replicate_generator(2, 0).random()

    def test_fingerprints_are_distinct(self):
        seeds = replicate_seeds(2024, 5)
        assert len(seeds) == 5
        assert len(set(seeds)) == 5
        assert seeds == replicate_seeds(2024, 5)

    def test_negative_inputs_rejected(self):
        with pytest.raises(ValueError):
            replicate_generator(-1, 0)
        with pytest.raises(ValueError):
            replicate_generator(0, -1)
