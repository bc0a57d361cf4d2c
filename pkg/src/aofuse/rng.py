"""Deterministic RNG stream derivation.

Every random draw in the toolkit comes from a stream keyed by
(seed, label, *indices). Streams are independent of execution order and
worker count, which is what makes the pipeline bit-reproducible.
"""

import zlib

import numpy as np


def _label_id(label: str) -> int:
    # crc32 is stable across platforms and Python processes (unlike hash()).
    return zlib.crc32(label.encode("utf-8"))


def stream(seed: int, label: str, *indices: int) -> np.random.Generator:
    """Return the Generator for stream (seed, label, indices)."""
    entropy = [int(seed) & 0xFFFFFFFF, _label_id(label)] + [int(i) & 0xFFFFFFFFFFFF for i in indices]
    return np.random.default_rng(np.random.SeedSequence(entropy))
