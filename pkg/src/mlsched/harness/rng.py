"""Named random sub-streams derived from one master seed."""
from __future__ import annotations

import hashlib

import numpy as np


def substream_seed(seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{int(seed)}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for component ``name``; stable across platforms and runs."""
    return np.random.Generator(np.random.PCG64(substream_seed(seed, name)))
