"""Deterministic RNG derivation shared by masking, sampling, and mock tools.

Every stochastic component derives its generator from a user seed plus one
or more string labels (typically an utterance id).  The derivation is stable
across processes and worker scheduling, unlike ``hash()``.
"""

from __future__ import annotations

import hashlib

import numpy as np


def label_digest(label: str) -> int:
    """64-bit stable digest of a text label."""
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "big")


def derive_rng(seed: int, *labels: str) -> np.random.Generator:
    """Generator seeded by ``seed`` and split by the given labels.

    Same (seed, labels) always yields the same stream; any label change
    yields an independent stream.
    """
    entropy = [seed & 0xFFFFFFFFFFFFFFFF] + [label_digest(lab) for lab in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))
