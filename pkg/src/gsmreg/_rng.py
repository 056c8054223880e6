"""Deterministic seed derivation for independent worker streams."""
import numpy as np

__all__ = ["derive_seed"]


def derive_seed(master_seed: int, *keys: int) -> int:
    """64-bit child seed for the stream identified by (master_seed, keys...).

    Children of distinct key paths are statistically independent, and the
    mapping is stable across platforms, so parallel work scheduled in any
    order reproduces the same draws.
    """
    ss = np.random.SeedSequence([int(master_seed), *[int(k) for k in keys]])
    return int(ss.generate_state(2, np.uint32).view(np.uint64)[0])
