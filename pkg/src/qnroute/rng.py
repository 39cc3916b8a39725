"""Named deterministic RNG streams.

Every randomized stage (graph generation, cover sampling, tracking choice,
measurement sampling) draws from its own stream derived from a root seed, so
changing how much randomness one stage consumes never perturbs the others.
"""

from __future__ import annotations

import hashlib
import random


def stream_seed(root_seed: int, name: str) -> int:
    """Derive a 64-bit sub-seed for the named stream."""
    digest = hashlib.sha256(f"{root_seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def stream(root_seed: int, name: str) -> random.Random:
    """Return an independent ``random.Random`` for the named stream."""
    return random.Random(stream_seed(root_seed, name))
