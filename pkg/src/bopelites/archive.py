"""Descriptor-space region grid, structured elite archive, and QD scoring."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OUT_OF_BOUNDS = -1


@dataclass(frozen=True)
class RegionGrid:
    """Uniform partitioning of a box in descriptor space.

    Each descriptor dimension i is split into `partitions[i]` equal
    intervals, forming prod(partitions) regions. Values exactly on an
    interior boundary belong to the upper partition; values at the global
    upper bound belong to the last partition.
    """

    lower: np.ndarray
    upper: np.ndarray
    partitions: tuple
    edges: tuple = field(init=False, repr=False)

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        parts = tuple(int(p) for p in self.partitions)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("bounds must be matching 1-d arrays")
        if len(parts) != lower.shape[0]:
            raise ValueError("one partition count per descriptor dimension")
        if np.any(lower >= upper):
            raise ValueError("each lower bound must be below the upper bound")
        if any(p < 1 for p in parts):
            raise ValueError("partition counts must be positive")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "partitions", parts)
        object.__setattr__(self, "edges", tuple(
            np.linspace(lower[i], upper[i], parts[i] + 1)
            for i in range(len(parts))))

    @property
    def descriptor_dim(self) -> int:
        return len(self.partitions)

    @property
    def region_count(self) -> int:
        return int(np.prod(self.partitions))

    def region_indices(self, b: np.ndarray) -> np.ndarray:
        """Flat region index for each row of b; OUT_OF_BOUNDS (-1) outside."""
        b2 = np.atleast_2d(np.asarray(b, dtype=float))
        per_dim = np.empty((b2.shape[0], self.descriptor_dim), dtype=np.int64)
        oob = np.zeros(b2.shape[0], dtype=bool)
        for j, edges in enumerate(self.edges):
            idx = np.searchsorted(edges, b2[:, j], side="right") - 1
            idx[b2[:, j] == edges[-1]] = self.partitions[j] - 1
            oob |= (idx < 0) | (idx >= self.partitions[j])
            per_dim[:, j] = np.clip(idx, 0, self.partitions[j] - 1)
        flat = np.ravel_multi_index(per_dim.T, self.partitions)
        flat[oob] = OUT_OF_BOUNDS
        return flat

    def region_index(self, b) -> int:
        return int(self.region_indices(np.asarray(b, dtype=float)[None, :])[0])

    def multi_index(self, flat: int) -> tuple:
        return tuple(int(v) for v in np.unravel_index(flat, self.partitions))

    def region_box(self, flat: int):
        """(lower, upper) corners of one region's box."""
        multi = self.multi_index(flat)
        lo = np.array([self.edges[j][k] for j, k in enumerate(multi)])
        hi = np.array([self.edges[j][k + 1] for j, k in enumerate(multi)])
        return lo, hi

    def with_partitions(self, partitions) -> "RegionGrid":
        """Same descriptor bounds at a different resolution."""
        return RegionGrid(self.lower, self.upper, tuple(partitions))


@dataclass
class Observation:
    """One evaluated point. For invalid points y and b carry no meaning."""

    x: np.ndarray
    y: float
    b: np.ndarray | None
    valid: bool = True


class Archive:
    """Per-region elite storage plus append-only evaluation history.

    Elites are replaced only on strict objective improvement, so the QD
    score never decreases. Out-of-bounds or invalid observations stay in
    the history but are never archived.
    """

    def __init__(self, grid: RegionGrid):
        self.grid = grid
        r = grid.region_count
        self.elite_y = np.full(r, np.nan)
        self.elite_x = [None] * r
        self.elite_b = [None] * r
        self.elite_iteration = np.full(r, -1, dtype=np.int64)
        self.history: list[Observation] = []

    def offer(self, obs: Observation, iteration: int = -1) -> bool:
        """Offer an observation; returns True when it becomes a new elite."""
        self.history.append(obs)
        if not obs.valid or obs.b is None:
            return False
        region = self.grid.region_index(obs.b)
        if region == OUT_OF_BOUNDS:
            return False
        current = self.elite_y[region]
        if np.isnan(current) or obs.y > current:
            self.elite_y[region] = obs.y
            self.elite_x[region] = np.asarray(obs.x, dtype=float).copy()
            self.elite_b[region] = np.asarray(obs.b, dtype=float).copy()
            self.elite_iteration[region] = iteration
            return True
        return False

    def qd_score(self) -> float:
        """Sum of elite objective values; empty regions contribute zero."""
        return float(np.nansum(self.elite_y))

    def filled_mask(self) -> np.ndarray:
        return ~np.isnan(self.elite_y)

    def filled_count(self) -> int:
        return int(self.filled_mask().sum())

    def incumbents(self) -> np.ndarray:
        """Per-region elite value with empty regions mapped to zero,
        the improvement baseline used by the acquisition."""
        return np.where(np.isnan(self.elite_y), 0.0, self.elite_y)

    def elite_rows(self):
        """(region, multi_index, x, y, b, iteration) for filled regions."""
        for region in np.flatnonzero(self.filled_mask()):
            region = int(region)
            yield (region, self.grid.multi_index(region),
                   self.elite_x[region], float(self.elite_y[region]),
                   self.elite_b[region], int(self.elite_iteration[region]))


def predicted_qd_score(problem, grid: RegionGrid, proposals) -> float:
    """True QD score of per-region proposed points.

    `proposals` maps flat region index -> x (missing regions allowed).
    Each proposal is evaluated on the real problem and contributes its true
    objective only when its true descriptors land in the proposed region;
    mispredicted or invalid proposals contribute zero.
    """
    total = 0.0
    for region, x in proposals.items():
        if x is None:
            continue
        y, b, valid = problem.evaluate(np.asarray(x, dtype=float))
        if not valid:
            continue
        if grid.region_index(b) == int(region):
            total += y
    return total
