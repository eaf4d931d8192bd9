"""Seeded generation of planted-matching database pairs.

Every trial gets its own generator, derived from ``(master_seed, trial_index)``
through :class:`numpy.random.SeedSequence` with the trial index as spawn key.
The bit generator is PCG64 and normal variates come from numpy's ziggurat
sampler; :data:`GENERATOR_INFO` records this in report headers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CanonicalModel, DatabasePair, Matching

GENERATOR_INFO = {
    "seed_derivation": "numpy.random.SeedSequence(entropy=master_seed, spawn_key=(trial_index,))",
    "bit_generator": "PCG64",
    "normal_method": "ziggurat (numpy.random.Generator.standard_normal)",
    "numpy_version": np.__version__,
}

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class TrialSeed:
    master_seed: int
    trial_index: int

    def __post_init__(self):
        if not 0 <= self.master_seed <= _MASK64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.trial_index < 0:
            raise ValueError("trial_index must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.trial_index,))
        return np.random.Generator(np.random.PCG64(ss))

    def to_dict(self) -> dict:
        return {"master_seed": self.master_seed, "trial_index": self.trial_index}


def derive_trial_seed(master: int, trial: int) -> TrialSeed:
    return TrialSeed(int(master), int(trial))


@dataclass(frozen=True)
class PlantedInstance:
    databases: DatabasePair
    truth: Matching
    model: CanonicalModel
    # truth as an index map: row i of A is paired with row perm[i] of B
    perm: np.ndarray


def user_ids(n: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
    return tuple(f"u{i + 1}" for i in range(n)), tuple(f"v{i + 1}" for i in range(n))


def _draw_permutation(rng: np.random.Generator, n: int) -> np.ndarray:
    # Generator.permutation is a Fisher-Yates shuffle
    return rng.permutation(n)


def sample_matching(n: int, seed: TrialSeed) -> Matching:
    if n < 1:
        raise ValueError("n must be at least 1")
    users_a, users_b = user_ids(n)
    return Matching.from_permutation(users_a, users_b, _draw_permutation(seed.generator(), n))


def sample_instance(n: int, rho: CanonicalModel, seed: TrialSeed) -> PlantedInstance:
    """Draw a uniform matching, then one joint sample per matched pair.

    The matching is the first thing drawn from the trial's generator, so
    ``sample_instance(n, rho, s).truth == sample_matching(n, s)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not isinstance(rho, CanonicalModel):
        rho = CanonicalModel(rho)
    rng = seed.generator()
    perm = _draw_permutation(rng, n)
    d = rho.d
    r = rho.rho
    x = rng.standard_normal((n, d))
    z = rng.standard_normal((n, d))
    y = r * x + np.sqrt((1.0 - r) * (1.0 + r)) * z
    b = np.empty_like(y)
    b[perm] = y
    users_a, users_b = user_ids(n)
    perm.setflags(write=False)
    return PlantedInstance(
        databases=DatabasePair(users_a, users_b, x, b),
        truth=Matching.from_permutation(users_a, users_b, perm),
        model=rho,
        perm=perm,
    )
