"""Benchmark problems: box-constrained objectives with descriptor functions.

All evaluators are pure and vectorized over row-stacked inputs. A problem
bundles the search box, descriptor bounds (which define the archive grid),
and an optional validity test for domains with infeasible pockets.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_solve, cholesky

from .archive import RegionGrid
from .gp import KernelParams, matern52_cross
from .sampling import sobol_points


@dataclass(frozen=True)
class Problem:
    name: str
    input_lower: np.ndarray
    input_upper: np.ndarray
    descriptor_lower: np.ndarray
    descriptor_upper: np.ndarray
    objective: callable
    descriptors: callable
    validity: callable | None = None

    @property
    def input_dim(self) -> int:
        return self.input_lower.shape[0]

    @property
    def descriptor_dim(self) -> int:
        return self.descriptor_lower.shape[0]

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.input_lower) / (self.input_upper - self.input_lower)

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        return self.input_lower + z * (self.input_upper - self.input_lower)

    def grid(self, partitions) -> RegionGrid:
        return RegionGrid(self.descriptor_lower, self.descriptor_upper,
                          tuple(partitions))

    def is_valid(self, x: np.ndarray) -> np.ndarray:
        x2 = np.atleast_2d(x)
        if self.validity is None:
            return np.ones(x2.shape[0], dtype=bool)
        return np.asarray(self.validity(x2), dtype=bool)

    def evaluate(self, x):
        """Full evaluation of one point: (objective, descriptors, valid).

        Invalid points return (nan, None, False); objective and descriptors
        are not computed for them.
        """
        x1 = np.asarray(x, dtype=float)
        if not bool(self.is_valid(x1[None, :])[0]):
            return float("nan"), None, False
        y = float(np.asarray(self.objective(x1[None, :]))[0])
        b = np.asarray(self.descriptors(x1[None, :]))[0].copy()
        return y, b, True


class CountingProblem:
    """Wraps a problem and counts full evaluations (budget accounting)."""

    def __init__(self, problem: Problem):
        self.problem = problem
        self.evaluations = 0

    def __getattr__(self, name):
        return getattr(self.problem, name)

    def evaluate(self, x):
        self.evaluations += 1
        return self.problem.evaluate(x)


MISHRA_LOWER = np.array([-10.0, -6.5])
MISHRA_UPPER = np.array([0.0, 0.0])


def _mishra_objective(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    if np.any(x < MISHRA_LOWER) or np.any(x > MISHRA_UPPER):
        raise ValueError("input outside the Mishra bird box")
    x1, x2 = x[:, 0], x[:, 1]
    return (np.sin(x2) * np.exp((1.0 - np.cos(x1)) ** 2)
            + np.cos(x1) * np.exp((1.0 - np.sin(x2)) ** 2)
            + (x1 - x2) ** 2)


def mishra() -> Problem:
    """Mishra bird function, maximized over [-10,0] x [-6.5,0], with the
    negated inputs as descriptors."""
    return Problem(
        name="mishra",
        input_lower=MISHRA_LOWER, input_upper=MISHRA_UPPER,
        descriptor_lower=np.array([0.0, 0.0]),
        descriptor_upper=np.array([10.0, 6.5]),
        objective=_mishra_objective,
        descriptors=lambda x: -np.atleast_2d(x),
    )


def _arm_angles(x: np.ndarray) -> np.ndarray:
    return np.cumsum(2.0 * np.pi * x - np.pi, axis=1)


def _arm_objective(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    return 1.0 - np.sqrt(np.mean((x - x.mean(axis=1, keepdims=True)) ** 2,
                                 axis=1))


def _arm_descriptors(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    n = x.shape[1]
    cums = _arm_angles(x)
    b1 = np.sin(cums).sum(axis=1) / (2.0 * n) + 0.5
    b2 = np.cos(cums).sum(axis=1) / (2.0 * n) + 0.5
    return np.stack([b1, b2], axis=1)


def robot_arm() -> Problem:
    """Planar robot arm: rewards even joint angles; descriptors are the
    normalized end-effector coordinates, both in [0, 1]. Parts of the
    descriptor grid are physically unreachable."""
    return Problem(
        name="robot_arm",
        input_lower=np.zeros(4), input_upper=np.ones(4),
        descriptor_lower=np.array([0.0, 0.0]),
        descriptor_upper=np.array([1.0, 1.0]),
        objective=_arm_objective,
        descriptors=_arm_descriptors,
    )


def _rosenbrock6_objective(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    total = np.zeros(x.shape[0])
    for i in (0, 2, 4):
        a = x[:, i]
        bsq = x[:, i + 1] ** 2
        total += 100.0 * ((2.0 * a - 2.0 * bsq) ** 2 + (1.0 - 2.0 * bsq))
    return total


def rosenbrock6() -> Problem:
    return Problem(
        name="rosenbrock6",
        input_lower=np.zeros(6), input_upper=np.ones(6),
        descriptor_lower=np.array([0.0, 0.0]),
        descriptor_upper=np.array([1.0, 1.0]),
        objective=_rosenbrock6_objective,
        descriptors=lambda x: np.stack(
            [(np.atleast_2d(x)[:, 0] + np.atleast_2d(x)[:, 1]) / 2.0,
             (np.atleast_2d(x)[:, 2] - 1.0) ** 2], axis=1),
    )


class _GpRealization:
    """Deterministic function drawn from a Matern-5/2 prior.

    A joint Gaussian sample is drawn at fixed anchor points and the
    function is the noise-free posterior mean conditioned on them, which
    interpolates the drawn values and is smooth everywhere.
    """

    def __init__(self, dim: int, lengthscale: float, seed: int,
                 n_anchors: int = 300):
        self.params = KernelParams(lengthscales=np.full(dim, lengthscale),
                                   signal_variance=1.0)
        self.anchors = sobol_points(n_anchors, dim, seed)
        gram = matern52_cross(self.anchors, self.anchors, self.params)
        chol = cholesky(gram + 1e-10 * np.eye(n_anchors), lower=True)
        draw_rng = np.random.default_rng(seed)
        self.values = chol @ draw_rng.standard_normal(n_anchors)
        self.weights = cho_solve((chol, True), self.values)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        kx = matern52_cross(np.atleast_2d(x), self.anchors, self.params)
        return kx @ self.weights


@dataclass(frozen=True)
class SyntheticGpSpec:
    seed: int
    descriptor_count: int = 1
    input_dim: int = 10
    n_anchors: int = 300
    bound_probes: int = 100_000


@lru_cache(maxsize=8)
def _synthetic_gp_cached(seed: int, descriptor_count: int, input_dim: int,
                         n_anchors: int, bound_probes: int) -> Problem:
    root = np.random.SeedSequence(seed)
    children = root.spawn(descriptor_count + 1)

    def make_fn(child_seq):
        child_rng = np.random.default_rng(child_seq)
        lengthscale = float(child_rng.uniform(0.1, 1.0))
        fn_seed = int(child_rng.integers(0, 2**31 - 1))
        return _GpRealization(input_dim, lengthscale, fn_seed, n_anchors)

    objective_fn = make_fn(children[0])
    descriptor_fns = [make_fn(children[1 + j])
                      for j in range(descriptor_count)]

    def descriptors(x):
        x2 = np.atleast_2d(x)
        return np.stack([fn(x2) for fn in descriptor_fns], axis=1)

    # descriptor bounds: empirical range over a dense quasi-random probe
    probes = sobol_points(bound_probes, input_dim, seed=seed + 777)
    lows, highs = [], []
    for fn in descriptor_fns:
        vals = np.concatenate([fn(chunk)
                               for chunk in np.array_split(probes, 20)])
        lows.append(vals.min())
        highs.append(vals.max())

    return Problem(
        name=f"synthetic_gp:{seed}:{descriptor_count}",
        input_lower=np.zeros(input_dim), input_upper=np.ones(input_dim),
        descriptor_lower=np.array(lows), descriptor_upper=np.array(highs),
        objective=lambda x: objective_fn(np.atleast_2d(x)),
        descriptors=descriptors,
    )


def synthetic_gp_problem(spec: SyntheticGpSpec) -> Problem:
    """Objective plus descriptor functions drawn from seeded GP priors;
    the same seed yields identical functions in every process."""
    return _synthetic_gp_cached(spec.seed, spec.descriptor_count,
                                spec.input_dim, spec.n_anchors,
                                spec.bound_probes)


DISK_CENTER = np.array([0.3, 0.3])
DISK_RADIUS = 0.2


def invalid_disk_problem() -> Problem:
    """Mishra bird rescaled to the unit square with identity descriptors;
    points strictly inside a disk fail evaluation."""
    scale = MISHRA_UPPER - MISHRA_LOWER

    def objective(z):
        return _mishra_objective(MISHRA_LOWER + np.atleast_2d(z) * scale)

    def validity(z):
        d2 = ((np.atleast_2d(z) - DISK_CENTER) ** 2).sum(axis=1)
        return d2 >= DISK_RADIUS**2

    return Problem(
        name="invalid_disk",
        input_lower=np.zeros(2), input_upper=np.ones(2),
        descriptor_lower=np.array([0.0, 0.0]),
        descriptor_upper=np.array([1.0, 1.0]),
        objective=objective,
        descriptors=lambda z: np.atleast_2d(z).astype(float).copy(),
        validity=validity,
    )


def get_problem(problem_id: str) -> Problem:
    """Resolve a problem id: mishra, robot_arm, rosenbrock6, invalid_disk,
    or synthetic_gp:<seed>[:<descriptor_count>]."""
    if problem_id.startswith("synthetic_gp"):
        parts = problem_id.split(":")
        seed = int(parts[1]) if len(parts) > 1 else 0
        k = int(parts[2]) if len(parts) > 2 else 1
        return synthetic_gp_problem(SyntheticGpSpec(seed=seed,
                                                    descriptor_count=k))
    simple = {
        "mishra": mishra,
        "robot_arm": robot_arm,
        "rosenbrock6": rosenbrock6,
        "invalid_disk": invalid_disk_problem,
    }
    if problem_id not in simple:
        raise KeyError(f"unknown problem id: {problem_id!r}")
    return simple[problem_id]()
