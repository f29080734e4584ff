"""Independent random streams derived from one master seed.

Every stage draws from ``stream(master, stage, index)`` so that adding a
stage, or drawing more numbers in one stage, never shifts the numbers seen by
another.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, stage: str, index: int | str = 0) -> int:
    """Hash ``(master, stage, index)`` into a 64-bit seed."""
    payload = f"{int(master)}:{stage}:{index}".encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(master: int, stage: str, index: int | str = 0) -> np.random.Generator:
    """Return a PCG64 generator seeded from ``derive_seed``."""
    return np.random.default_rng(derive_seed(master, stage, index))
