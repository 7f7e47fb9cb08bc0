"""Stable 64-bit seed derivation, independent of PYTHONHASHSEED."""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


def stable_hash64(*parts) -> int:
    """Hash a tuple of ints/strings to a 64-bit value, reproducibly."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def derive_seed(base_seed: int, *parts) -> int:
    """XOR a base seed with the hash of a derivation path."""
    return (base_seed ^ stable_hash64(*parts)) & _MASK64
