"""Seeded random number generation and seed derivation.

All stochastic stages draw from numpy's PCG64 generator.  A single master
seed is split into per-stage seeds with SplitMix64, so any stage can be
re-run in isolation and still see the exact stream it saw inside the full
pipeline.
"""

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def splitmix64(state: int) -> int:
    """One step of the SplitMix64 mixing function (64-bit output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master_seed: int, stage: str) -> int:
    """Derive a per-stage 64-bit seed from a master seed and a stage name.

    The stage name is folded in byte-by-byte through SplitMix64, so distinct
    names give independent-looking streams while staying reproducible.
    """
    state = master_seed & _MASK64
    state = splitmix64(state)
    for byte in stage.encode("utf-8"):
        state = splitmix64(state ^ byte)
    return state


def make_rng(seed: int) -> np.random.Generator:
    """Return a PCG64-backed generator seeded with ``seed``.

    Identical seeds yield bit-identical streams (numpy documents the PCG64
    algorithm and its seeding via SeedSequence).
    """
    return np.random.Generator(np.random.PCG64(seed))


def stage_rng(master_seed: int, stage: str) -> np.random.Generator:
    """Generator for one named pipeline stage under a master seed."""
    return make_rng(derive_seed(master_seed, stage))
