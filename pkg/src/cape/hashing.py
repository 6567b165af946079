"""Platform-stable hashing for seed derivation.

Python's builtin ``hash`` is salted per process, so anything that must
reproduce across runs and machines (token vectors, rng stream splits)
derives its seed through blake2b instead.
"""

from __future__ import annotations

import hashlib


def stable_seed(*parts: object) -> int:
    """Derive a 64-bit seed from ``parts``, identically on every platform.

    Parts are joined by their string form with a separator, so
    ``stable_seed(7, "noise")`` always names the same stream and cannot
    collide with ``stable_seed(7, "no", "ise")``.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")
