"""Intra-component Pearson correlation diagnostics under GMM soft assignment."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InactiveComponentError, ValidationError
from .gmm import GmmModel, posteriors
from .linalg import weighted_moments

MIN_COMPONENT_MASS = 1e-8


@dataclass(frozen=True)
class ComponentCorrelation:
    rho: np.ndarray  # (D, D), unit diagonal
    zero_variance: np.ndarray  # (D,) bool, axes whose entries were forced to 0
    mass: float


def correlation_from_covariance(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    var = np.diagonal(cov).copy()
    dead = var <= 0
    sd = np.sqrt(np.where(dead, 1.0, var))
    rho = cov / np.outer(sd, sd)
    rho[dead, :] = 0.0
    rho[:, dead] = 0.0
    rho = np.clip(rho, -1.0, 1.0)
    np.fill_diagonal(rho, 1.0)
    return rho, dead


def weighted_correlation(points, weights) -> ComponentCorrelation:
    w = np.asarray(weights, dtype=np.float64)
    mass = float(w.sum())
    _, cov = weighted_moments(points, w / mass)
    rho, dead = correlation_from_covariance(cov)
    return ComponentCorrelation(rho, dead, mass)


def component_correlations(model: GmmModel, descriptors, k: int,
                           lam: np.ndarray | None = None) -> ComponentCorrelation:
    """Pearson correlations of ``descriptors`` using component ``k``'s
    normalised posteriors as the probability mass."""
    x = np.asarray(getattr(descriptors, "data", descriptors), dtype=np.float64)
    if not 0 <= k < model.K:
        raise ValidationError(f"component index {k} out of range for K={model.K}")
    if lam is None:
        lam = posteriors(model, x)
    mass = float(lam[:, k].sum())
    if mass <= MIN_COMPONENT_MASS:
        raise InactiveComponentError(f"component {k} has posterior mass {mass:.3g}")
    return weighted_correlation(x, lam[:, k])


@dataclass(frozen=True)
class CorrelationHistogram:
    bin_edges: np.ndarray
    frequencies: np.ndarray
    mass_below_005: float
    mass_005_to_05: float
    K: int
    D: int
    num_images: int
    num_pairs: int  # (image, active component) pairs averaged
    metadata: dict = field(default_factory=dict)

    @property
    def mass_at_least_005(self) -> float:
        return 1.0 - self.mass_below_005


def correlation_histogram(model: GmmModel, descriptor_sets, bins: int = 20,
                          weighting: str = "uniform") -> CorrelationHistogram:
    """Average histogram of ``|rho_ij|`` (i < j) over every active
    (image, component) pair.

    ``weighting="uniform"`` gives each pair equal weight; ``"mass"`` weights
    by the component's posterior mass in that image. Inactive components are
    skipped rather than counted as zeros.
    """
    if bins < 1:
        raise ValidationError("bins must be positive")
    if weighting not in ("uniform", "mass"):
        raise ValidationError(f"unknown weighting {weighting!r}")
    if model.D < 2:
        raise ValidationError("correlations need at least two feature dimensions")
    edges = np.linspace(0.0, 1.0, bins + 1)
    iu = np.triu_indices(model.D, 1)
    acc = np.zeros(bins)
    low = mid = total = 0.0
    pairs = images = 0
    for ds in descriptor_sets:
        x = np.asarray(getattr(ds, "data", ds), dtype=np.float64)
        if x.shape[0] == 0:
            continue
        images += 1
        lam = posteriors(model, x)
        for k in range(model.K):
            try:
                cc = component_correlations(model, x, k, lam)
            except InactiveComponentError:
                continue
            r = np.abs(cc.rho[iu])
            h, _ = np.histogram(r, bins=edges)
            wt = 1.0 if weighting == "uniform" else cc.mass
            acc += wt * h / r.size
            low += wt * float(np.mean(r < 0.05))
            mid += wt * float(np.mean((r >= 0.05) & (r <= 0.5)))
            total += wt
            pairs += 1
    if pairs == 0:
        raise InactiveComponentError("no active (image, component) pair found")
    return CorrelationHistogram(edges, acc / total, low / total, mid / total,
                                model.K, model.D, images, pairs, {"weighting": weighting})
