"""Deterministic 64-bit seed derivation.

Experiments fan a single user seed out to many independent generators
(per class, per trial, per grid point). The split uses the splitmix64
finalizer so every derived stream is a pure function of the master seed
and the integer path to it, independent of execution order.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def mix64(*parts):
    """Fold integer parts into one 64-bit seed, splittable-generator style."""
    h = 0
    for part in parts:
        h = _splitmix64(h ^ (int(part) & _MASK))
    return h
