"""Deterministic derivation of random streams."""

import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    """Return a 63-bit seed derived from a root seed and a path of integer keys."""
    sequence = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return a generator for the stream (seed, *keys)."""
    return np.random.default_rng(derive_seed(seed, *keys))
