"""Noise-free Gaussian-process regression with a Matern-5/2 ARD kernel.

Inputs are expected in the normalized unit box; targets are z-scored
internally per fit, with a constant-zero prior mean in standardized space.
Hyperparameters are chosen by maximizing the log marginal likelihood with
multi-start pattern search in log10 parameter space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .pattern_search import PatternSearchConfig, pattern_search

SQRT5 = np.sqrt(5.0)


class GpFitError(RuntimeError):
    """Raised when the Gram matrix stays singular after jitter escalation."""


@dataclass(frozen=True)
class KernelParams:
    """ARD Matern-5/2 hyperparameters: one lengthscale per input dimension
    plus a signal variance."""

    lengthscales: np.ndarray
    signal_variance: float

    def __post_init__(self):
        ls = np.asarray(self.lengthscales, dtype=float)
        object.__setattr__(self, "lengthscales", ls)
        if not (np.all(np.isfinite(ls)) and np.all(ls > 0)):
            raise ValueError("lengthscales must be positive and finite")
        if not (np.isfinite(self.signal_variance) and self.signal_variance > 0):
            raise ValueError("signal_variance must be positive and finite")


@dataclass(frozen=True)
class Posterior:
    """Posterior mean and standard deviation at a single point."""

    mean: float
    std: float


def kernel_eval(a, b, params: KernelParams) -> float:
    """Matern-5/2 ARD covariance between two points.

    k(a, b) = sv * (1 + sqrt(5) r + 5 r^2 / 3) * exp(-sqrt(5) r) with
    r^2 = sum_d (a_d - b_d)^2 / ls_d^2.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.shape != params.lengthscales.shape:
        raise ValueError("dimension mismatch between points and lengthscales")
    r2 = float(np.sum(((a - b) / params.lengthscales) ** 2))
    r = np.sqrt(r2)
    return float(params.signal_variance * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2)
                 * np.exp(-SQRT5 * r))


def _scaled_sq_dists(a: np.ndarray, b: np.ndarray, lengthscales) -> np.ndarray:
    # ||za||^2 + ||zb||^2 - 2 za.zb as one GEMM; clamp the cancellation noise
    za = a / lengthscales
    zb = b / lengthscales
    r2 = ((za * za).sum(axis=1)[:, None] + (zb * zb).sum(axis=1)[None, :]
          - 2.0 * (za @ zb.T))
    np.maximum(r2, 0.0, out=r2)
    return r2


def matern52_cross(a: np.ndarray, b: np.ndarray, params: KernelParams) -> np.ndarray:
    """Covariance matrix K(a, b) for row-stacked point sets."""
    r2 = _scaled_sq_dists(np.atleast_2d(a), np.atleast_2d(b), params.lengthscales)
    r = np.sqrt(r2)
    r *= SQRT5
    out = r2
    out *= 5.0 / 3.0
    out += 1.0 + r
    out *= np.exp(-r)
    out *= params.signal_variance
    return out


def matern52_gram(x: np.ndarray, params: KernelParams) -> np.ndarray:
    return matern52_cross(x, x, params)


@dataclass(frozen=True)
class GpFitConfig:
    n_starts: int = 8
    lengthscale_bounds: tuple = (0.005, 4.0)
    signal_variance_bounds: tuple = (0.05, 20.0)
    jitter: float = 1e-8
    max_jitter: float = 1e-4
    search: PatternSearchConfig = field(default_factory=lambda: PatternSearchConfig(
        initial_step=0.25, contraction=0.5, max_generations=40, min_step=0.01))


class GpModel:
    """Trained posterior over one scalar function.

    Immutable after construction; prediction is safe to call from anywhere.
    Holds the Cholesky factor of K(X, X) + jitter*I and the solved weights
    K^-1 (Y - m) in standardized target space.
    """

    def __init__(self, inputs, targets, kernel: KernelParams, jitter_used,
                 chol, alpha, y_mean, y_std):
        self.inputs = inputs
        self.targets = targets
        self.kernel = kernel
        self.jitter = jitter_used
        self._chol = chol
        self._alpha = alpha
        self.y_mean = y_mean
        self.y_std = y_std

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def predict(self, x: np.ndarray):
        """Exact posterior mean and std at query points.

        Accepts a (q, d) batch or a single d-vector; returns float arrays
        (means, stds) on the raw target scale, variance clamped at zero.
        """
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        kx = matern52_cross(x2, self.inputs, self.kernel)
        mean = self.y_mean + self.y_std * (kx @ self._alpha)
        v = solve_triangular(self._chol, kx.T, lower=True, check_finite=False)
        var = self.kernel.signal_variance - np.einsum("ij,ij->j", v, v)
        np.maximum(var, 0.0, out=var)
        std = self.y_std * np.sqrt(var)
        return mean, std

    def predict_mean(self, x: np.ndarray) -> np.ndarray:
        """Posterior mean only; skips the variance solve."""
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        kx = matern52_cross(x2, self.inputs, self.kernel)
        return self.y_mean + self.y_std * (kx @ self._alpha)

    def predict_one(self, x) -> Posterior:
        mean, std = self.predict(np.asarray(x, dtype=float)[None, :])
        return Posterior(float(mean[0]), float(std[0]))

    def log_marginal_likelihood(self) -> float:
        y_std_space = (self.targets - self.y_mean) / self.y_std
        return _lml_from_factorization(self._chol, self._alpha, y_std_space)

    def with_params(self, params: KernelParams, config: GpFitConfig | None = None) -> "GpModel":
        """Refactorize the same data under different hyperparameters."""
        return condition(self.inputs, self.targets, params, config or GpFitConfig())


def _lml_from_factorization(chol, alpha, y_std_space) -> float:
    n = y_std_space.shape[0]
    return float(-0.5 * y_std_space @ alpha
                 - np.sum(np.log(np.diag(chol)))
                 - 0.5 * n * np.log(2.0 * np.pi))


def _factorize(gram: np.ndarray, jitter0: float, max_jitter: float):
    """Cholesky with escalating diagonal jitter; returns (L, jitter) or None."""
    jitter = jitter0
    eye = np.eye(gram.shape[0])
    while jitter <= max_jitter * (1 + 1e-12):
        try:
            chol = cholesky(gram + jitter * eye, lower=True, check_finite=False)
            return chol, jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    return None


def _standardize(targets: np.ndarray):
    y_mean = float(np.mean(targets))
    y_std = float(np.std(targets))
    if not np.isfinite(y_std) or y_std < 1e-12:
        y_std = 1.0
    return (targets - y_mean) / y_std, y_mean, y_std


def log_marginal_likelihood(inputs, targets_std_space, params: KernelParams,
                            config: GpFitConfig | None = None) -> float:
    """LML of standardized targets under the given hyperparameters.

    Returns -inf when the Gram matrix cannot be factorized within the
    jitter budget, which lets the hyperparameter search skip the region.
    """
    config = config or GpFitConfig()
    gram = matern52_gram(inputs, params)
    fact = _factorize(gram, config.jitter, config.max_jitter)
    if fact is None:
        return -np.inf
    chol, _ = fact
    alpha = cho_solve((chol, True), targets_std_space, check_finite=False)
    return _lml_from_factorization(chol, alpha, targets_std_space)


def condition(inputs, targets, params: KernelParams,
              config: GpFitConfig | None = None) -> GpModel:
    """Build a model on data with fixed hyperparameters (no LML search)."""
    config = config or GpFitConfig()
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    y_std_space, y_mean, y_std = _standardize(targets)
    gram = matern52_gram(inputs, params)
    fact = _factorize(gram, config.jitter, config.max_jitter)
    if fact is None:
        raise GpFitError(
            f"Gram matrix singular even at jitter {config.max_jitter:g}")
    chol, jitter_used = fact
    alpha = cho_solve((chol, True), y_std_space, check_finite=False)
    return GpModel(inputs, targets, params, jitter_used, chol, alpha,
                   y_mean, y_std)


def _log_bounds(config: GpFitConfig, dim: int):
    lo = np.log10(np.array([config.lengthscale_bounds[0]] * dim
                           + [config.signal_variance_bounds[0]]))
    hi = np.log10(np.array([config.lengthscale_bounds[1]] * dim
                           + [config.signal_variance_bounds[1]]))
    return lo, hi


def _params_from_log(theta: np.ndarray) -> KernelParams:
    vals = 10.0 ** np.asarray(theta, dtype=float)
    return KernelParams(lengthscales=vals[:-1], signal_variance=float(vals[-1]))


def fit_gp(inputs, targets, config: GpFitConfig | None = None,
           rng: np.random.Generator | None = None,
           warm_start: KernelParams | None = None,
           n_starts: int | None = None,
           search: PatternSearchConfig | None = None) -> GpModel:
    """Fit hyperparameters by multi-start pattern search on the LML.

    The first start is the warm-start parameters when provided (otherwise
    a moderate default); remaining starts are drawn log-uniformly inside
    the search bounds. `n_starts`/`search` override the config, which lets
    refits run cheap warm-started searches.
    """
    config = config or GpFitConfig()
    rng = rng or np.random.default_rng(0)
    n_starts = config.n_starts if n_starts is None else n_starts
    search = search or config.search

    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError("inputs and targets length mismatch")
    if inputs.shape[0] < 2:
        raise ValueError("need at least 2 observations to fit")
    dim = inputs.shape[1]

    y_std_space, _, _ = _standardize(targets)
    lo, hi = _log_bounds(config, dim)

    if warm_start is not None:
        first = np.log10(np.concatenate([warm_start.lengthscales,
                                         [warm_start.signal_variance]]))
        first = np.clip(first, lo, hi)
    else:
        first = np.clip(np.log10(np.array([0.5] * dim + [1.0])), lo, hi)
    starts = [first]
    for _ in range(n_starts - 1):
        starts.append(lo + rng.random(dim + 1) * (hi - lo))

    def neg_cache_free_lml_batch(thetas: np.ndarray) -> np.ndarray:
        out = np.empty(thetas.shape[0])
        for i, th in enumerate(thetas):
            out[i] = log_marginal_likelihood(inputs, y_std_space,
                                             _params_from_log(th), config)
        return out

    best_theta, best_val = None, -np.inf
    for s in starts:
        theta, val, _ = pattern_search(neg_cache_free_lml_batch, s, search,
                                       lower=lo, upper=hi)
        if val > best_val:
            best_theta, best_val = theta, val
    if best_theta is None or not np.isfinite(best_val):
        raise GpFitError("log marginal likelihood not finite at any start")

    return condition(inputs, targets, _params_from_log(best_theta), config)
