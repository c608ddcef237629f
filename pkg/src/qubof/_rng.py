"""Seeded random streams.

All randomness in qubof comes from numpy's Philox4x64-10 counter-based bit
generator, wrapped in a ``numpy.random.Generator``. A seed is a 64-bit
unsigned integer; ``Philox(seed)`` expands it through numpy's SeedSequence,
so the same seed gives the same stream on every platform numpy supports.

Independent sub-streams (per trial, per slot, per protocol phase) are keyed
with :func:`derive_seed`, a BLAKE2b hash of the parent seed and a label, so
adding a new consumer never shifts the draws of an existing one.
"""

from __future__ import annotations

import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def make_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    """Philox-backed generator for ``seed``; generators pass through untouched.

    ``None`` draws a fresh seed from OS entropy.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        return np.random.Generator(np.random.Philox())
    seed = int(seed)
    if not 0 <= seed <= SEED_MASK:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(seed))


def derive_seed(seed: int, *labels: object) -> int:
    """Child seed for ``(seed, *labels)``, stable across runs and processes."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "big")


def fresh_seed() -> int:
    """A 64-bit seed from OS entropy."""
    return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
