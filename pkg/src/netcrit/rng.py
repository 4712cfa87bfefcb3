"""Deterministic random-stream derivation.

Every random draw in the package comes from a stream derived from the master
seed plus a string tag (and optional integer indices, e.g. a path index).
Derivation hashes the tag, so adding new consumers never perturbs existing
streams, and parallel schedules cannot change what any consumer sees.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_rng(seed: int, *tags) -> np.random.Generator:
    """Return a Generator for the stream identified by ``(seed, *tags)``."""
    h = hashlib.sha256()
    h.update(str(int(seed)).encode())
    for tag in tags:
        h.update(b"/")
        h.update(str(tag).encode())
    # 4 words of the digest are plenty of entropy for PCG64 seeding.
    words = [int.from_bytes(h.digest()[4 * i : 4 * i + 4], "little") for i in range(4)]
    return np.random.default_rng(np.random.SeedSequence(words))


def unit_complex(rng: np.random.Generator, avoid_real: bool = True) -> complex:
    """Random scalar on the unit circle.

    With ``avoid_real`` the angle stays away from the real axis, so convex
    combinations ``gamma*t + (1-t)`` cannot vanish for t in (0, 1].
    """
    if avoid_real:
        theta = rng.uniform(0.1 * np.pi, 0.9 * np.pi)
        if rng.random() < 0.5:
            theta = -theta
    else:
        theta = rng.uniform(0.0, 2.0 * np.pi)
    return complex(np.cos(theta), np.sin(theta))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard complex Gaussian array (independent real/imag parts)."""
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
