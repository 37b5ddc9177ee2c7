"""Deterministic seeded sampling used throughout the benchmark suite.

Every random quantity in the project is drawn from a generator obtained via
``rng_for(seed, *key)``.  The key is a tuple of small integers (for the
benchmark: ``(seed, cell_index, trial_index)``), fed to ``SeedSequence`` as
entropy, so streams are independent and the results do not depend on
execution order or thread schedule.

Gaussian variates are produced by the Box-Muller transform applied to the
generator's uniform stream; Beta(a, 1) variates by the inverse CDF
``u ** (1/a)``.
"""

from __future__ import annotations

import numpy as np


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for a given (seed, *key) stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, key)])))


def normal(rng: np.random.Generator, size: int, sigma: float = 1.0) -> np.ndarray:
    """Draw ``size`` N(0, sigma^2) variates via Box-Muller.

    Consumes uniforms in pairs; the trailing variate of the last pair is
    discarded when ``size`` is odd.
    """
    npairs = (size + 1) // 2
    # map [0,1) -> (0,1] so the log is finite
    u1 = 1.0 - rng.random(npairs)
    u2 = rng.random(npairs)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    return sigma * z[:size]


def uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform[0, 1) draws, straight from the generator."""
    return rng.random(size)


def beta_a1(rng: np.random.Generator, a: float, size: int) -> np.ndarray:
    """Beta(a, 1) draws by inverse CDF: x = u ** (1/a)."""
    if a <= 0:
        raise ValueError(f"Beta shape parameter must be positive, got {a}")
    return rng.random(size) ** (1.0 / a)
