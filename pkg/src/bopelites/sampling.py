"""Quasi-random sampling helpers shared by the optimizer, loop, and baselines."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.stats import qmc


def sobol_points(n: int, dim: int, seed: int) -> np.ndarray:
    """Scrambled Sobol sample of `n` points in [0, 1]^dim.

    scipy warns when n is not a power of two; we accept the slight balance
    loss because budgets like 10*d are fixed by the experiment design.
    """
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*balance properties.*")
        pts = sampler.random(n)
    return np.asarray(pts, dtype=float)


def spawn_seed(rng: np.random.Generator) -> int:
    """Draw a fresh 31-bit seed from a generator (for nested samplers)."""
    return int(rng.integers(0, 2**31 - 1))
