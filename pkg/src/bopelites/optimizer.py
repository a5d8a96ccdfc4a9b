"""Maximizes the acquisition surface each iteration.

A Sobol presample is scored and stratified by predicted region to pick
diverse restart points; pattern searches then run from every restart in
lockstep, and the best candidate (including the best raw presample) wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .archive import OUT_OF_BOUNDS
from .pattern_search import PatternSearchConfig, pattern_search_lockstep
from .sampling import sobol_points, spawn_seed


@dataclass(frozen=True)
class OptimizerConfig:
    presample_count: int = 1024
    restart_count: int = 10
    pattern: PatternSearchConfig = field(default_factory=PatternSearchConfig)


@dataclass
class RestartPlan:
    presample: np.ndarray
    presample_values: np.ndarray
    presample_scores: np.ndarray
    predicted_regions: np.ndarray
    restarts: np.ndarray
    candidate_results: list = field(default_factory=list)

    @property
    def best_presample(self):
        i = int(np.argmax(self.presample_values))
        return self.presample[i], float(self.presample_values[i])


@dataclass
class Proposal:
    x: np.ndarray
    value: float
    no_improvement: bool
    plan: RestartPlan


def select_restarts(evaluator, dim: int, config: OptimizerConfig,
                    rng: np.random.Generator) -> RestartPlan:
    """Pick diverse, promising starting points for local optimization.

    Scores a Sobol presample against each point's predicted region, keeps
    the top scorer of the best-scoring unique regions for about half the
    restart slots, then fills the rest with random presample points,
    preferring regions not yet represented.
    """
    presample = sobol_points(config.presample_count, dim, spawn_seed(rng))
    values, scores, regions = evaluator.presample_eval(presample)
    count = config.restart_count

    order = np.argsort(-scores, kind="stable")
    region_best_idx = []
    seen = set()
    for i in order:
        r = int(regions[i])
        if r == OUT_OF_BOUNDS or r in seen:
            continue
        seen.add(r)
        region_best_idx.append(int(i))

    n_region_slots = min(len(region_best_idx), max(1, count - count // 2))
    chosen = region_best_idx[:n_region_slots]
    used_regions = {int(regions[i]) for i in chosen}
    used_idx = set(chosen)

    # random fills, preferring points from regions not already covered
    pool = rng.permutation(config.presample_count)
    fresh = [int(i) for i in pool
             if int(i) not in used_idx
             and int(regions[i]) not in used_regions
             and int(regions[i]) != OUT_OF_BOUNDS]
    anything = [int(i) for i in pool if int(i) not in used_idx]
    for i in fresh + anything:
        if len(chosen) >= count:
            break
        if i in used_idx:
            continue
        chosen.append(i)
        used_idx.add(i)
        used_regions.add(int(regions[i]))

    restarts = presample[np.array(chosen[:count], dtype=int)]
    return RestartPlan(presample, values, scores, regions, restarts)


def propose_next(evaluator, dim: int, config: OptimizerConfig,
                 rng: np.random.Generator) -> Proposal:
    """One full acquisition-maximization round.

    Returns the best candidate across all restarts and the presample.
    When no candidate anywhere has positive value the proposal carries
    `no_improvement=True` and the best presample point as a fallback.
    """
    plan = select_restarts(evaluator, dim, config, rng)

    def f_batch(points, owners=None):
        return evaluator.values(points)

    xs, vals, _ = pattern_search_lockstep(f_batch, plan.restarts,
                                          config.pattern)
    plan.candidate_results = [(xs[i], float(vals[i]))
                              for i in range(xs.shape[0])]

    best_pre_x, best_pre_val = plan.best_presample
    cand_x = list(xs) + [best_pre_x]
    cand_v = np.append(vals, best_pre_val)
    winner = int(np.argmax(cand_v))
    x_best, v_best = np.array(cand_x[winner]), float(cand_v[winner])

    if v_best <= 0.0:
        return Proposal(best_pre_x.copy(), best_pre_val, True, plan)
    return Proposal(x_best, v_best, False, plan)
