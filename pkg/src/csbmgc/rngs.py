"""Seeded randomness with portable, component-addressable streams.

All sampling in this package draws from counter-based Philox generators.  A
single user-facing seed is split into independent child streams, one per model
component, so that e.g. changing the edge probabilities never perturbs the
feature draws for the same seed:

=========  =====
component  child
=========  =====
labels     0
edges      1
features   2
mask       3
noise      4
=========  =====

Gaussian variates are produced by inverse-CDF transform (``scipy.special.ndtri``
applied to open-interval uniforms) rather than the generator's native method,
pinning the bit stream to one documented algorithm.
"""

from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import ndtri

#: Child-stream indices, one per sampled model component.
LABEL_STREAM = 0
EDGE_STREAM = 1
FEATURE_STREAM = 2
MASK_STREAM = 3
NOISE_STREAM = 4

_TWO53 = 1 << 53


def child_generator(seed: int, stream: int) -> np.random.Generator:
    """Return the Philox generator for one component stream of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def uniform_open(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform doubles on the open interval (0, 1).

    Drawn as k / 2**53 with k uniform on {1, ..., 2**53 - 1}, so both
    endpoints are excluded and the inverse normal CDF stays finite.
    """
    return rng.integers(1, _TWO53, size=size, dtype=np.int64) / _TWO53


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normal draws via the inverse-CDF transform."""
    return ndtri(uniform_open(rng, size))


def derive_seed(base_seed: int, *parts) -> int:
    """Derive a per-task seed from a base seed and task coordinates.

    The coordinates (grid values, trial indices, role tags) are rendered to a
    canonical string and hashed with BLAKE2b, so the result is stable across
    processes and platforms.  Floats are rendered with ``repr`` (shortest
    round-trip form).
    """
    text = "|".join(repr(float(p)) if isinstance(p, float) else str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return (int(base_seed) + int.from_bytes(digest, "big")) % (1 << 63)
