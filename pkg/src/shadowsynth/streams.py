"""Deterministic counter-based random streams.

Every randomized stage of the pipeline draws from a generator keyed on
(seed, item index) instead of sharing one sequential stream.  Item N is
then reproducible in isolation, output does not depend on worker count
or completion order, and a run of N items is a byte-exact prefix of a
longer run with the same seed.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def item_rng(seed: int, index: int) -> np.random.Generator:
    """Generator keyed on (seed, index) via the Philox counter-based RNG.

    The same (seed, index) pair yields the same stream on every platform
    and in every process.
    """
    key = np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def substream(seed: int, index: int, lane: int) -> np.random.Generator:
    """Third-level stream for per-row / per-pixel decorrelation.

    Folds `lane` into the key so that e.g. each scanline of a render has
    its own independent stream under one (seed, index) pair.
    """
    mixed = (index * 0x9E3779B97F4A7C15 + lane) & _MASK64
    key = np.array([seed & _MASK64, mixed], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
