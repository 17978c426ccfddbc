"""Seeded, splittable random streams.

Each ``(seed, name)`` pair maps to its own Philox counter-based generator, so
a run's data, noise, initialisation and evaluation draws never share state
and can be reproduced independently of one another.
"""

import hashlib

import numpy as np

from .errors import ContractError


def _stream_id(name):
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(seed, name):
    """Return the generator for stream ``name`` of run ``seed``."""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ContractError(f"seed must be a non-negative integer, got {seed!r}")
    seq = np.random.SeedSequence([int(seed), _stream_id(name)])
    return np.random.Generator(np.random.Philox(seq))
