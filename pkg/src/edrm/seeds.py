"""Named random streams derived from a single root seed.

Every consumer of randomness (parameter init, batch shuffling, the
permutation test, ...) draws from its own named stream so that adding a
new consumer never perturbs the draws of existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_seed(root_seed: int, name: str) -> int:
    """Derive a 64-bit child seed from (root_seed, name)."""
    digest = hashlib.sha256(f"{root_seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng(root_seed: int, name: str) -> np.random.Generator:
    """A generator for the named stream under ``root_seed``."""
    return np.random.default_rng(stream_seed(root_seed, name))
