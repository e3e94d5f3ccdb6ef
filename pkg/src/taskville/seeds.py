"""Named, reproducible RNG sub-streams derived from a single run seed."""

from __future__ import annotations

import hashlib
from random import Random


def substream(seed: int, name: str) -> Random:
    """Return an independent Random keyed by (seed, name).

    Uses sha256 rather than hash() so streams are stable across processes
    and Python versions.
    """
    digest = hashlib.sha256(f"{seed}:{name}".encode("utf-8")).digest()
    return Random(int.from_bytes(digest[:8], "big"))
