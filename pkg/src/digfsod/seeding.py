"""Deterministic seed derivation.

Every random draw in the package flows from explicit 64-bit seeds.  Sub-task
seeds are derived by hashing (parent_seed, purpose_tag, *indices) with
SHA-256, so independent consumers (data generation, noise draws, placement
sampling) can never collide and results are reproducible across platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np
import torch

_MASK63 = (1 << 63) - 1


def derive_seed(parent: int, tag: str, *indices: int) -> int:
    """Derive a child seed from a parent seed, a purpose tag and indices."""
    h = hashlib.sha256()
    h.update(int(parent).to_bytes(8, "little", signed=False))
    h.update(tag.encode("utf-8"))
    for idx in indices:
        h.update(b"\x00")
        h.update(int(idx).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest()[:8], "little") & _MASK63


def numpy_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for a derived seed."""
    return np.random.Generator(np.random.PCG64(seed))


def torch_generator(seed: int) -> torch.Generator:
    """CPU torch generator for a derived seed."""
    gen = torch.Generator()
    gen.manual_seed(int(seed) & _MASK63)
    return gen
