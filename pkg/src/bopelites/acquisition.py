"""Acquisition functions for quality-diversity Bayesian optimization.

Implements per-region expected improvement, Gaussian region-membership
probabilities, the EJIE family (plain, probability-cutoff EJIE+, and
feasibility-weighted EJIE++), UCB for the surrogate-assisted baselines,
and the adaptive probability cutoff schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr
from sklearn.svm import SVC

from .archive import OUT_OF_BOUNDS, Archive, RegionGrid
from .gp import GpModel, Posterior

INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _norm_pdf(z: np.ndarray) -> np.ndarray:
    return INV_SQRT_2PI * np.exp(-0.5 * z * z)


def upper_confidence_bound(mean, std, beta_ucb: float):
    """mean + beta * std, elementwise."""
    if beta_ucb < 0:
        raise ValueError("beta_ucb must be non-negative")
    return mean + beta_ucb * std


def ucb(posterior: Posterior, beta_ucb: float) -> float:
    return float(upper_confidence_bound(posterior.mean, posterior.std,
                                        beta_ucb))


def expected_improvement(mean, std, incumbent):
    """Closed-form EI of N(mean, std^2) over `incumbent`, broadcasting.

    Degenerate std = 0 falls back to max(mean - incumbent, 0).
    """
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    diff = mean - incumbent
    safe = np.where(std > 0, std, 1.0)
    z = diff / safe
    ei = diff * ndtr(z) + safe * _norm_pdf(z)
    return np.where(std > 0, ei, np.maximum(diff, 0.0))


def ei_region(posterior: Posterior, elite_value=None) -> float:
    """EI against one region's elite; empty regions improve over zero."""
    incumbent = 0.0 if elite_value is None else float(elite_value)
    return float(expected_improvement(posterior.mean, posterior.std,
                                      incumbent))


def _degenerate_partition_row(mean: float, edges: np.ndarray) -> np.ndarray:
    """Point-mass partition assignment consistent with the region grid's
    boundary rules (boundary to upper partition, global top included)."""
    n = edges.shape[0] - 1
    row = np.zeros(n)
    idx = int(np.searchsorted(edges, mean, side="right")) - 1
    if mean == edges[-1]:
        idx = n - 1
    if 0 <= idx < n:
        row[idx] = 1.0
    return row


def partition_masses(means, stds, edges: np.ndarray) -> np.ndarray:
    """Gaussian mass of each partition [edges[k], edges[k+1]) per point.

    Returns a (q, len(edges)-1) array. Rows with std = 0 are point masses
    on the containing partition.
    """
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    safe = np.where(stds > 0, stds, 1.0)
    cdf = ndtr((edges[None, :] - means[:, None]) / safe[:, None])
    masses = np.diff(cdf, axis=1)
    degenerate = np.flatnonzero(stds <= 0)
    for i in degenerate:
        masses[i] = _degenerate_partition_row(means[i], edges)
    return masses


def partition_probability(posterior: Posterior, lb: float, ub: float) -> float:
    """Probability that a Gaussian descriptor lands in [lb, ub)."""
    if not lb < ub:
        raise ValueError("partition requires lb < ub")
    if posterior.std <= 0:
        return 1.0 if lb <= posterior.mean < ub else 0.0
    return float(ndtr((ub - posterior.mean) / posterior.std)
                 - ndtr((lb - posterior.mean) / posterior.std))


def region_probabilities(means, stds, grid: RegionGrid) -> np.ndarray:
    """Joint region-membership probabilities for a batch of points.

    `means`/`stds` are (q, m) posterior summaries of the m descriptor
    dimensions (assumed independent); returns (q, region_count) with
    C-order region indexing. Rows sum to the in-bounds probability mass.
    """
    means = np.atleast_2d(means)
    stds = np.atleast_2d(stds)
    out = partition_masses(means[:, 0], stds[:, 0], grid.edges[0])
    for j in range(1, grid.descriptor_dim):
        mj = partition_masses(means[:, j], stds[:, j], grid.edges[j])
        out = (out[:, :, None] * mj[:, None, :]).reshape(out.shape[0], -1)
    return out


def region_probability(descriptor_posteriors, grid: RegionGrid,
                       region: int) -> float:
    """Product of per-dimension partition probabilities for one region."""
    lo, hi = grid.region_box(region)
    multi = grid.multi_index(region)
    prob = 1.0
    for j, post in enumerate(descriptor_posteriors):
        top = multi[j] == grid.partitions[j] - 1
        if post.std <= 0:
            edges = grid.edges[j]
            inside = (lo[j] <= post.mean < hi[j]) or (top and post.mean == edges[-1])
            prob *= 1.0 if inside else 0.0
        else:
            prob *= partition_probability(post, lo[j], hi[j])
    return prob


@dataclass
class AcquisitionState:
    """Bookkeeping for the adaptive region-probability cutoff.

    `t` counts true evaluations so far; `init_budget` is the initial
    design size that anchors the schedule (cutoff = 1/regions right after
    initialization when init_budget = t). `mispredict_count` rises when a
    dominant predicted region turns out wrong; `stall_count` rises when a
    whole proposal round finds no positive acquisition value.
    """

    input_dim: int
    init_budget: int
    t: int
    mispredict_count: int = 0
    stall_count: int = 0
    cutoff: float = 0.0


def update_cutoff(state: AcquisitionState, region_count: int) -> float:
    """Recompute the probability cutoff from the current counters.

    The exponent decays from 1 toward 0 as evaluations accumulate, moving
    the cutoff from 1/regions toward 1/2; the denominator is clamped at 1
    so early stalls cannot make it non-positive.
    """
    if region_count < 2:
        raise ValueError("cutoff schedule needs at least 2 regions")
    denom = max(1, state.mispredict_count - 2 * state.stall_count + state.t)
    gamma = np.sqrt(state.init_budget / denom)
    state.cutoff = float(0.5 * (2.0 / region_count) ** gamma)
    return state.cutoff


class FeasibilityModel:
    """Calibrated probability-of-validity classifier over search points.

    Inactive (probability one everywhere) until trained on data containing
    both classes. Uses an RBF support-vector classifier with Platt-style
    calibrated outputs; falls back to a sigmoid over the decision margin
    when the class counts are too small for internal calibration.
    """

    def __init__(self, clf=None, use_sigmoid=False):
        self._clf = clf
        self._use_sigmoid = use_sigmoid

    @property
    def active(self) -> bool:
        return self._clf is not None

    def prob_valid(self, x: np.ndarray) -> np.ndarray:
        x2 = np.atleast_2d(x)
        if self._clf is None:
            return np.ones(x2.shape[0])
        if self._use_sigmoid:
            margin = self._clf.decision_function(x2)
            if list(self._clf.classes_)[1] != 1:
                margin = -margin
            return 1.0 / (1.0 + np.exp(-margin))
        col = list(self._clf.classes_).index(1)
        return self._clf.predict_proba(x2)[:, col]


def fit_feasibility(inputs, valid_flags, seed: int = 0) -> FeasibilityModel:
    """Train the validity classifier; single-class data yields an
    inactive model."""
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    labels = np.asarray(valid_flags, dtype=int)
    if labels.min() == labels.max():
        return FeasibilityModel()
    counts = np.bincount(labels, minlength=2)
    if counts.min() >= 5:
        clf = SVC(kernel="rbf", C=10.0, gamma="scale", probability=True,
                  random_state=seed)
        clf.fit(x, labels)
        return FeasibilityModel(clf)
    clf = SVC(kernel="rbf", C=10.0, gamma="scale")
    clf.fit(x, labels)
    return FeasibilityModel(clf, use_sigmoid=True)


class EjieEvaluator:
    """Batched EJIE+/EJIE++ over surrogate models for one iteration.

    Region membership comes from the descriptor GPs; probabilities below
    the cutoff are zeroed and the survivors renormalized. With
    `normalize=False` and cutoff 0 this reduces to the plain
    probability-weighted sum of per-region improvements.
    """

    def __init__(self, objective_model: GpModel, descriptor_models,
                 grid: RegionGrid, incumbents: np.ndarray,
                 cutoff: float = 0.0, feasibility: FeasibilityModel | None = None,
                 normalize: bool = True):
        self.objective_model = objective_model
        self.descriptor_models = list(descriptor_models)
        self.grid = grid
        self.incumbents = np.asarray(incumbents, dtype=float)
        self.cutoff = float(cutoff)
        self.feasibility = feasibility or FeasibilityModel()
        self.normalize = normalize
        uniq, inverse = np.unique(self.incumbents, return_inverse=True)
        self._unique_incumbents = uniq
        self._incumbent_slot = inverse

    def _posteriors(self, x: np.ndarray):
        mu, s = self.objective_model.predict(x)
        desc = [m.predict(x) for m in self.descriptor_models]
        means = np.stack([d[0] for d in desc], axis=1)
        stds = np.stack([d[1] for d in desc], axis=1)
        return mu, s, means, stds

    def _ei_all_regions(self, mu, s) -> np.ndarray:
        # EI columns repeat across regions sharing an incumbent value
        ei_unique = expected_improvement(mu[:, None], s[:, None],
                                         self._unique_incumbents[None, :])
        return ei_unique[:, self._incumbent_slot]

    def _combine(self, probs, ei, x):
        rho = np.where(probs > self.cutoff, probs, 0.0)
        weighted = np.einsum("ij,ij->i", rho, ei)
        if self.normalize:
            total = rho.sum(axis=1)
            values = np.divide(weighted, total,
                               out=np.zeros_like(weighted), where=total > 0)
        else:
            values = weighted
        if self.feasibility.active:
            values = values * self.feasibility.prob_valid(x)
        return values

    def values(self, x: np.ndarray) -> np.ndarray:
        x2 = np.atleast_2d(x)
        mu, s, means, stds = self._posteriors(x2)
        probs = region_probabilities(means, stds, self.grid)
        return self._combine(probs, self._ei_all_regions(mu, s), x2)

    def presample_eval(self, x: np.ndarray):
        """(values, restart_scores, predicted_regions) in one posterior pass.

        Restart scores judge each point only against the elite of the
        region its posterior-mean descriptors fall in; points predicted
        out of bounds score zero.
        """
        x2 = np.atleast_2d(x)
        mu, s, means, stds = self._posteriors(x2)
        probs = region_probabilities(means, stds, self.grid)
        ei = self._ei_all_regions(mu, s)
        values = self._combine(probs, ei, x2)

        regions = self.grid.region_indices(means)
        in_bounds = regions != OUT_OF_BOUNDS
        scores = np.zeros(x2.shape[0])
        rows = np.flatnonzero(in_bounds)
        scores[rows] = ei[rows, regions[rows]]
        if self.feasibility.active:
            scores *= self.feasibility.prob_valid(x2)
        return values, scores, regions

    def attribution(self, x: np.ndarray):
        """(value, dominant_region, value_share) for a single point."""
        x2 = np.atleast_2d(x)
        mu, s, means, stds = self._posteriors(x2)
        probs = region_probabilities(means, stds, self.grid)[0]
        ei = self._ei_all_regions(mu, s)[0]
        rho = np.where(probs > self.cutoff, probs, 0.0)
        total = rho.sum()
        contributions = (rho / total) * ei if total > 0 else rho * 0.0
        value = contributions.sum()
        if value <= 0:
            return float(value), None, 0.0
        dominant = int(np.argmax(contributions))
        return float(value), dominant, float(contributions[dominant] / value)


class WhiteboxEjieEvaluator:
    """EJIE with known descriptor functions: region membership is exact,
    so the value collapses to EI against the true region's elite."""

    def __init__(self, objective_model: GpModel, descriptor_fn,
                 grid: RegionGrid, incumbents: np.ndarray,
                 feasibility: FeasibilityModel | None = None):
        self.objective_model = objective_model
        self.descriptor_fn = descriptor_fn
        self.grid = grid
        self.incumbents = np.asarray(incumbents, dtype=float)
        self.feasibility = feasibility or FeasibilityModel()

    def _values_regions(self, x: np.ndarray):
        x2 = np.atleast_2d(x)
        regions = self.grid.region_indices(self.descriptor_fn(x2))
        mu, s = self.objective_model.predict(x2)
        values = np.zeros(x2.shape[0])
        rows = np.flatnonzero(regions != OUT_OF_BOUNDS)
        if rows.size:
            inc = self.incumbents[regions[rows]]
            values[rows] = expected_improvement(mu[rows], s[rows], inc)
        if self.feasibility.active:
            values *= self.feasibility.prob_valid(x2)
        return values, regions

    def values(self, x: np.ndarray) -> np.ndarray:
        return self._values_regions(x)[0]

    def presample_eval(self, x: np.ndarray):
        values, regions = self._values_regions(x)
        return values, values.copy(), regions

    def attribution(self, x: np.ndarray):
        values, regions = self._values_regions(np.atleast_2d(x))
        region = int(regions[0])
        if values[0] <= 0 or region == OUT_OF_BOUNDS:
            return float(values[0]), None, 0.0
        return float(values[0]), region, 1.0


def _evaluator_from_archive(objective_model, descriptor_models,
                            archive: Archive, state: AcquisitionState,
                            feasibility=None, normalize=True, cutoff=None):
    return EjieEvaluator(
        objective_model, descriptor_models, archive.grid,
        archive.incumbents(),
        cutoff=state.cutoff if cutoff is None else cutoff,
        feasibility=feasibility, normalize=normalize)


def ejie(x, objective_model, descriptor_models, archive: Archive) -> float:
    """Plain probability-weighted sum of per-region expected improvements."""
    ev = EjieEvaluator(objective_model, descriptor_models, archive.grid,
                       archive.incumbents(), cutoff=0.0, normalize=False)
    return float(ev.values(np.asarray(x, dtype=float)[None, :])[0])


def ejie_plus(x, objective_model, descriptor_models, archive: Archive,
              state: AcquisitionState) -> float:
    """Cutoff-filtered, renormalized EJIE; zero when every region is cut."""
    ev = _evaluator_from_archive(objective_model, descriptor_models,
                                 archive, state)
    return float(ev.values(np.asarray(x, dtype=float)[None, :])[0])


def ejie_plus_plus(x, objective_model, descriptor_models, archive: Archive,
                   state: AcquisitionState,
                   feasibility: FeasibilityModel) -> float:
    """EJIE+ scaled by the probability of validity when the feasibility
    model is active; identical to EJIE+ otherwise."""
    ev = _evaluator_from_archive(objective_model, descriptor_models,
                                 archive, state, feasibility=feasibility)
    return float(ev.values(np.asarray(x, dtype=float)[None, :])[0])
