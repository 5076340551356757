"""Deterministic per-trial random streams.

Each Monte-Carlo trial gets its own counter-based generator keyed by
(seed, trial index) through a SplitMix64 finalizer, so trial k can be
replayed in isolation without drawing k-1 predecessors.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(seed, k):
    """SplitMix64 finalizer of seed + k * golden gamma, a 64-bit integer.

    Reference values (seed, k) -> output:
      (0, 0)  -> 0x0
      (0, 1)  -> 0xE220A8397B1DCDAF
      (42, 7) -> 0x37E9671C45376D5D
    """
    z = (int(seed) + int(k) * GOLDEN_GAMMA) & MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK64
    z ^= z >> 31
    return z


def trial_rng(seed, trial):
    """Philox generator keyed by two SplitMix64 words of (seed, trial)."""
    key = np.array(
        [splitmix64(seed, 2 * trial), splitmix64(seed, 2 * trial + 1)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))
