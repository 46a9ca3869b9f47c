"""Seed derivation: one global seed, many labelled random streams.

Every component that needs randomness asks for a stream by label, for
example ``generator(seed, "episode", scene_id, 17)``. The child seed is a
BLAKE2b hash of the global seed and the labels, so streams are independent
of the order in which components run and of how work is split across
threads.
"""

from __future__ import annotations

import hashlib
import typing as typ

import numpy as np

_DIGEST_BYTES: typ.Final = 8

type Label = str | int


def derive_seed(seed: int, *labels: Label) -> int:
    """Return the 64-bit child seed for *seed* and *labels*."""
    material = ":".join([str(seed), *(str(label) for label in labels)])
    digest = hashlib.blake2b(material.encode("utf-8"), digest_size=_DIGEST_BYTES)
    return int.from_bytes(digest.digest(), "big")


def generator(seed: int, *labels: Label) -> np.random.Generator:
    """Return a PCG64 generator for the labelled stream."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *labels)))
