"""Named random sub-streams derived from a single root seed.

Every stage draws from ``numpy.random.Generator(PCG64)`` seeded by
``SeedSequence(root, spawn_key=(crc32(name),))``. Changing the seed of one
stage therefore never perturbs another.
"""
from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("pca-subsample", "gmm-init", "gmm-subsample", "svm-shuffle", "synth", "split")


def stream(root_seed: int, name: str) -> np.random.Generator:
    key = zlib.crc32(name.encode("utf-8"))
    seq = np.random.SeedSequence(int(root_seed), spawn_key=(key,))
    return np.random.Generator(np.random.PCG64(seq))


def stream_seed(root_seed: int, name: str) -> int:
    """A 63-bit integer seed for APIs that take an int rather than a Generator."""
    return int(stream(root_seed, name).integers(0, 2**63 - 1))
