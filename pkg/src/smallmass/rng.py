"""Deterministic random-stream derivation.

Every random quantity in the package flows from a single 64-bit master seed
through a documented derivation tree::

    master_seed
      └─ (domain, *path)          -- one SeedSequence per purpose
           └─ chain index         -- one Philox stream per chain

Streams are keyed structurally (``SeedSequence(master, spawn_key=path)``),
never by spawning order, so any subset of the tree can be reproduced in
isolation and parallel chains are reproducible independently of scheduling.

Domains (first path component):
    0  initial states of a chain ensemble
    1  per-chain simulation noise
    2  projection directions for sliced transport estimates
    3  bootstrap resampling
    4  model validation probes
    5  miscellaneous single-shot draws (subsampling etc.)
"""
from __future__ import annotations

from numpy.random import Generator, Philox, SeedSequence

DOMAIN_INIT = 0
DOMAIN_CHAIN = 1
DOMAIN_DIRECTIONS = 2
DOMAIN_BOOTSTRAP = 3
DOMAIN_PROBE = 4
DOMAIN_MISC = 5


def seed_sequence(master_seed: int, *path: int) -> SeedSequence:
    """SeedSequence at a node of the derivation tree."""
    return SeedSequence(master_seed, spawn_key=tuple(int(p) for p in path))


def generator(master_seed: int, *path: int) -> Generator:
    """Philox-backed Generator at a node of the derivation tree."""
    return Generator(Philox(seed_sequence(master_seed, *path)))


def chain_bit_generators(master_seed: int, run_path: tuple[int, ...], n_chains: int) -> list[Philox]:
    """One Philox bit generator per chain under DOMAIN_CHAIN/run_path.

    The returned streams are exactly the ones both simulation backends
    consume, in the same per-chain order, which is what makes the compiled
    and pure-python paths comparable trajectory by trajectory.
    """
    return [
        Philox(seed_sequence(master_seed, DOMAIN_CHAIN, *run_path, c))
        for c in range(n_chains)
    ]


def init_generator(master_seed: int, run_path: tuple[int, ...]) -> Generator:
    """Generator for the initial-state draw of a chain ensemble."""
    return generator(master_seed, DOMAIN_INIT, *run_path)
