"""Seeded random number generation.

All randomness in the package flows from a single 64-bit master seed.
Each pipeline stage derives its own independent generator from the master
seed plus a stage name, so stages can be reordered or parallelized without
perturbing each other's streams.
"""

import hashlib

import numpy as np


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    """Return an independent generator for a named stage under one seed."""
    digest = hashlib.sha256(stage.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, key]))
