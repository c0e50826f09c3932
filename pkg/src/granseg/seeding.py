from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, *parts: object) -> int:
    """Stable 64-bit seed from a master seed plus identifying parts.

    Unlike ``hash()``, the result does not depend on PYTHONHASHSEED or on the
    order in which dialogues are visited.
    """
    key = "\x1f".join([str(int(seed)), *(str(p) for p in parts)])
    return int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "little")


def rng_for(seed: int, *parts: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *parts))
