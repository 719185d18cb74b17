"""Deterministic, label-split random streams.

Every stochastic component in the toolkit draws from a stream derived from
(seed, purpose label, index), so campaigns are reproducible and parallel
synthesis matches serial synthesis bit for bit.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_entropy(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def stream(seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Generator for the sub-stream named by (seed, label, index)."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), _label_entropy(label), int(index)])
    return np.random.default_rng(ss)


def derive_seed(seed: int, label: str, index: int = 0) -> int:
    """A 64-bit child seed, for components that want an integer seed."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), _label_entropy(label), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
