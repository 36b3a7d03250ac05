"""Seedable generators with independent per-purpose substreams."""

import zlib

import numpy as np


def substream(seed: int, purpose: str) -> np.random.Generator:
    """Return a generator for ``purpose`` that does not depend on any other purpose's draws."""
    tag = zlib.crc32(purpose.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))
