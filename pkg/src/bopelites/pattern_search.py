"""Coordinate-poll pattern search over the unit box.

The same engine maximizes acquisition surfaces and GP log-marginal
likelihoods. Objectives are supplied as batch callables mapping an
(k, d) array of points to k values, so one generation costs a single
vectorized evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PatternSearchConfig:
    initial_step: float = 0.1
    contraction: float = 0.5
    max_generations: int = 100
    max_evals_per_generation: int = 1500
    min_step: float = 1e-5


def pattern_search(f_batch, start, config: PatternSearchConfig,
                   lower=None, upper=None):
    """Maximize f over a box by coordinate polling from `start`.

    Polls +/- step along every axis, moves to the best strictly improving
    neighbor, and halves the step when no poll improves. Stops when the
    step drops below `min_step` or the generation cap is hit. The returned
    value is never worse than f(start).

    Returns (x_best, value, evaluations_used).
    """
    xs, values, evals = pattern_search_lockstep(
        f_batch, np.asarray(start, dtype=float)[None, :], config,
        lower=lower, upper=upper)
    return xs[0], float(values[0]), evals


def pattern_search_lockstep(f_batch, starts, config: PatternSearchConfig,
                            lower=None, upper=None):
    """Advance several independent pattern searches in lockstep.

    All still-active searches contribute their poll points to one batched
    objective call per generation, which keeps GP-backed acquisitions in
    large matrix operations instead of per-point solves. Each search keeps
    its own step size and terminates independently; results are identical
    to running `pattern_search` on each start separately.

    `f_batch(points, owners)` receives the searching index of each row so
    objectives may differ per search (e.g. per-region constraints).

    Returns (best_points (r, d), best_values (r,), total_evaluations).
    """
    starts = np.asarray(starts, dtype=float)
    r, d = starts.shape
    lo = np.zeros(d) if lower is None else np.asarray(lower, dtype=float)
    hi = np.ones(d) if upper is None else np.asarray(upper, dtype=float)

    xs = np.clip(starts, lo, hi)
    values = np.asarray(f_batch(xs, np.arange(r)), dtype=float)
    evals = r
    steps = np.full(r, config.initial_step)
    active = steps >= config.min_step

    polls_per_search = min(2 * d, config.max_evals_per_generation)
    n_axes = polls_per_search // 2

    for _ in range(config.max_generations):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        # poll block: for each active search, +/- step on each axis, clamped
        cand = np.repeat(xs[idx], polls_per_search, axis=0)
        offsets = np.zeros((idx.size, polls_per_search, d))
        axes = np.arange(n_axes)
        rows = np.arange(idx.size)[:, None]
        offsets[rows, 2 * axes[None, :], axes[None, :]] = steps[idx, None]
        offsets[rows, 2 * axes[None, :] + 1, axes[None, :]] = -steps[idx, None]
        cand = cand + offsets.reshape(-1, d)
        np.clip(cand, lo, hi, out=cand)

        owners = np.repeat(idx, polls_per_search)
        cvals = np.asarray(f_batch(cand, owners), dtype=float).reshape(
            idx.size, polls_per_search)
        evals += cand.shape[0]

        best_k = np.argmax(cvals, axis=1)
        best_v = cvals[np.arange(idx.size), best_k]
        improved = best_v > values[idx]

        moved = idx[improved]
        if moved.size:
            picks = (np.flatnonzero(improved), best_k[improved])
            xs[moved] = cand.reshape(idx.size, polls_per_search, d)[picks]
            values[moved] = best_v[improved]
        stuck = idx[~improved]
        steps[stuck] *= config.contraction
        active[stuck] = steps[stuck] >= config.min_step

    return xs, values, evals
