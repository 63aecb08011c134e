"""Gaussian mixture models with diagonal or full covariances.

Training is plain EM initialised from k-means++/Lloyd. Covariance flooring
is the constrained maximiser of the M-step (eigenvalues, or per-axis
variances, clipped from below), so the log-likelihood stays monotone.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import NumericError, ValidationError
from .linalg import eigh, symmetrize, weighted_moments

log = logging.getLogger(__name__)

DIAGONAL = "diagonal"
FULL = "full"
KINDS = (DIAGONAL, FULL)

DEFAULT_FIT_SAMPLE_CAP = 500_000
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GmmModel:
    """Mixture parameters plus per-component caches.

    Build instances with :meth:`from_params`, which floors the covariances
    and fills ``inv_sqrt_cov`` and ``log_det``.
    """

    priors: np.ndarray  # (K,)
    means: np.ndarray  # (K, D)
    covariances: np.ndarray  # (K, D, D); diagonal kind keeps zeros off-diagonal
    kind: str
    floor: float
    inv_sqrt_cov: np.ndarray = field(repr=False)  # (K, D, D)
    log_det: np.ndarray = field(repr=False)  # (K,)

    @property
    def K(self) -> int:
        return self.means.shape[0]

    @property
    def D(self) -> int:
        return self.means.shape[1]

    @property
    def variances(self) -> np.ndarray:
        """Per-axis variances, shape (K, D)."""
        return np.diagonal(self.covariances, axis1=1, axis2=2).copy()

    @property
    def inv_sigma(self) -> np.ndarray:
        """Per-axis 1/sigma, shape (K, D); exact for the diagonal kind."""
        return np.diagonal(self.inv_sqrt_cov, axis1=1, axis2=2).copy()

    @classmethod
    def from_params(cls, priors, means, covariances, kind: str = FULL,
                    floor: float = 1e-10) -> "GmmModel":
        if kind not in KINDS:
            raise ValidationError(f"unknown covariance kind {kind!r}")
        if not floor > 0:
            raise ValidationError(f"covariance floor must be positive, got {floor!r}")
        priors = np.array(priors, dtype=np.float64).reshape(-1)
        means = np.array(means, dtype=np.float64)
        if means.ndim == 1:
            means = means[:, None]
        k, d = means.shape
        covs = np.array(covariances, dtype=np.float64)
        if covs.shape == (k, d):
            covs = np.stack([np.diag(c) for c in covs])
        if priors.shape != (k,) or covs.shape != (k, d, d):
            raise ValidationError(
                f"inconsistent shapes: priors {priors.shape}, means {means.shape}, "
                f"covariances {covs.shape}")
        for arr, name in ((priors, "priors"), (means, "means"), (covs, "covariances")):
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"{name} contain non-finite values")
        if np.any(priors <= 0):
            raise ValidationError("priors must be strictly positive")
        if abs(priors.sum() - 1.0) > 1e-9:
            raise ValidationError(f"priors sum to {priors.sum()!r}, expected 1")

        inv = np.empty_like(covs)
        log_det = np.empty(k)
        for j in range(k):
            if kind == DIAGONAL:
                var = np.maximum(np.diagonal(covs[j]), floor)
                covs[j] = np.diag(var)
                inv[j] = np.diag(1.0 / np.sqrt(var))
                log_det[j] = np.sum(np.log(var))
            else:
                dec = eigh(covs[j])
                w = np.maximum(dec.eigenvalues, floor)
                v = dec.eigenvectors
                if np.any(dec.eigenvalues < floor):
                    covs[j] = symmetrize((v * w) @ v.T)
                else:
                    covs[j] = symmetrize(covs[j])
                inv[j] = symmetrize((v * w ** -0.5) @ v.T)
                log_det[j] = np.sum(np.log(w))
        return cls(priors=priors, means=means, covariances=covs, kind=kind,
                   floor=float(floor), inv_sqrt_cov=inv, log_det=log_det)

    def check_cache(self, tol: float = 1e-6) -> None:
        """Verify ``R Sigma R = I`` for every component."""
        eye = np.eye(self.D)
        for j in range(self.K):
            r = self.inv_sqrt_cov[j]
            err = np.max(np.abs(r @ self.covariances[j] @ r - eye))
            if not err <= tol:
                raise NumericError(f"component {j}: whitening cache error {err:.3g}")

    def with_kind(self, kind: str) -> "GmmModel":
        return GmmModel.from_params(self.priors, self.means, self.covariances, kind, self.floor)


@dataclass(frozen=True)
class EmConfig:
    max_iters: int = 200
    rel_tol: float = 1e-6
    covariance_floor: float | None = None  # None: 1e-4 x mean per-axis variance
    seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        if self.max_iters < 1 or self.restarts < 1:
            raise ValidationError("max_iters and restarts must be positive")
        if not self.rel_tol > 0:
            raise ValidationError("rel_tol must be positive")
        if self.covariance_floor is not None and not self.covariance_floor > 0:
            raise ValidationError("covariance_floor must be positive")


@dataclass
class FitReport:
    """Diagnostics of the returned EM run."""

    log_likelihoods: list[float]
    reset_iterations: list[int]
    converged: bool
    restart: int


def _as_points(points, d: int | None = None) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValidationError(f"points must be 2-D, got shape {x.shape}")
    if d is not None and x.shape[1] != d:
        raise ValidationError(f"points have dimension {x.shape[1]}, model expects {d}")
    if not np.all(np.isfinite(x)):
        raise NumericError("points contain non-finite values")
    return x


def whitened_deviations(model: GmmModel, x: np.ndarray, k: int) -> np.ndarray:
    """Rows ``Sigma_k^{-1/2} (x_n - mu_k)``."""
    diff = x - model.means[k]
    if model.kind == DIAGONAL:
        return diff * model.inv_sigma[k]
    return diff @ model.inv_sqrt_cov[k]


def component_log_densities(model: GmmModel, points) -> np.ndarray:
    """``log pi_k + log N(x_n; mu_k, Sigma_k)`` as an (N, K) matrix."""
    x = _as_points(points, model.D)
    out = np.empty((x.shape[0], model.K))
    const = model.D * _LOG_2PI
    for k in range(model.K):
        w = whitened_deviations(model, x, k)
        maha = np.einsum("ij,ij->i", w, w)
        out[:, k] = np.log(model.priors[k]) - 0.5 * (const + model.log_det[k] + maha)
    return out


def posteriors(model: GmmModel, points) -> np.ndarray:
    """Soft assignments, one row per point, each row summing to one."""
    logp = component_log_densities(model, points)
    logp -= logsumexp(logp, axis=1, keepdims=True)
    return np.exp(logp)


def posterior(model: GmmModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError("posterior expects a single vector")
    return posteriors(model, x[None, :])[0]


def log_likelihood(model: GmmModel, points) -> float:
    logp = component_log_densities(model, points)
    return float(np.sum(logsumexp(logp, axis=1)))


def sample(model: GmmModel, n: int, seed: int | np.random.Generator = 0,
           return_labels: bool = False):
    """Draw ``n`` points: categorical component choice, then a Gaussian draw
    through the symmetric square root of that component's covariance."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    labels = rng.choice(model.K, size=n, p=model.priors)
    z = rng.standard_normal((n, model.D))
    out = np.empty((n, model.D))
    for k in range(model.K):
        idx = labels == k
        if not np.any(idx):
            continue
        if model.kind == DIAGONAL:
            root = np.diag(np.sqrt(model.variances[k]))
        else:
            dec = eigh(model.covariances[k])
            root = (dec.eigenvectors * np.sqrt(np.maximum(dec.eigenvalues, 0))) @ dec.eigenvectors.T
        out[idx] = z[idx] @ root + model.means[k]
    return (out, labels) if return_labels else out


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (np.einsum("ij,ij->i", x, x)[:, None] - 2.0 * x @ centers.T
         + np.einsum("ij,ij->i", centers, centers)[None, :])
    return np.maximum(d, 0.0)


def kmeans_init(points, K: int, seed: int | np.random.Generator = 0,
                max_iters: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """k-means++ seeding followed by Lloyd iterations.

    Empty clusters are re-seeded from the point farthest from its centre.
    Returns ``(centers, assignments)``.
    """
    x = _as_points(points)
    n = x.shape[0]
    if K < 1:
        raise ValidationError("K must be at least 1")
    if K > n:
        raise ValidationError(f"K={K} exceeds the number of points {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    chosen = [int(rng.integers(n))]
    closest = _sq_dists(x, x[chosen])[:, 0]
    for _ in range(1, K):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            # every remaining point duplicates a centre
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(free))
        chosen.append(nxt)
        closest = np.minimum(closest, _sq_dists(x, x[[nxt]])[:, 0])
    centers = x[chosen].copy()

    assign = np.argmin(_sq_dists(x, centers), axis=1)
    for _ in range(max_iters):
        counts = np.bincount(assign, minlength=K)
        new = np.zeros_like(centers)
        np.add.at(new, assign, x)
        for k in np.flatnonzero(counts == 0):
            dist = np.sum((x - centers[assign]) ** 2, axis=1)
            far = int(np.argmax(dist))
            new[k] = x[far]
            counts[k] = 1
            assign[far] = k
        centers = new / counts[:, None]
        new_assign = np.argmin(_sq_dists(x, centers), axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return centers, assign


def default_floor(points: np.ndarray) -> float:
    v = float(np.mean(np.var(points, axis=0)))
    return 1e-4 * v if v > 0 else 1e-10


def _m_step(x: np.ndarray, resp: np.ndarray, kind: str, floor: float,
            rng: np.random.Generator, global_cov: np.ndarray, iteration: int,
            resets: list[int]) -> GmmModel:
    n, d = x.shape
    K = resp.shape[1]
    mass = resp.sum(axis=0)
    priors = mass / n
    means = np.empty((K, d))
    covs = np.empty((K, d, d))
    reset = False
    for k in range(K):
        if mass[k] < 1e-10 * n:
            means[k] = x[rng.integers(n)]
            covs[k] = global_cov
            priors[k] = 1.0 / K
            reset = True
            continue
        w = resp[:, k] / mass[k]
        if kind == FULL:
            means[k], covs[k] = weighted_moments(x, w)
        else:
            means[k] = w @ x
            covs[k] = np.diag(w @ (x - means[k]) ** 2)
    if reset:
        resets.append(iteration)
        log.warning("EM iteration %d: reset starving component(s)", iteration)
    priors = priors / priors.sum()
    return GmmModel.from_params(priors, means, covs, kind, floor)


def _initial_model(x: np.ndarray, K: int, kind: str, floor: float,
                   rng: np.random.Generator, global_cov: np.ndarray) -> GmmModel:
    _, assign = kmeans_init(x, K, rng)
    resp = np.zeros((x.shape[0], K))
    resp[np.arange(x.shape[0]), assign] = 1.0
    return _m_step(x, resp, kind, floor, rng, global_cov, -1, [])


def _run_em(x: np.ndarray, K: int, kind: str, config: EmConfig, floor: float,
            rng: np.random.Generator, restart: int) -> tuple[GmmModel, FitReport]:
    n = x.shape[0]
    _, global_cov = weighted_moments(x, np.full(n, 1.0 / n))
    if kind == DIAGONAL:
        global_cov = np.diag(np.diag(global_cov))
    model = _initial_model(x, K, kind, floor, rng, global_cov)
    history: list[float] = []
    resets: list[int] = []
    converged = False
    for it in range(config.max_iters):
        logp = component_log_densities(model, x)
        norm = logsumexp(logp, axis=1, keepdims=True)
        ll = float(np.sum(norm))
        if not np.isfinite(ll):
            raise NumericError(f"EM produced a non-finite log-likelihood at iteration {it}")
        if history and ll - history[-1] <= config.rel_tol * abs(history[-1]):
            history.append(ll)
            converged = True
            break
        history.append(ll)
        resp = np.exp(logp - norm)
        model = _m_step(x, resp, kind, floor, rng, global_cov, it, resets)
    return model, FitReport(history, resets, converged, restart)


def fit_em(points, K: int, kind: str = FULL, config: EmConfig | None = None,
           return_report: bool = False):
    """Maximum-likelihood mixture fit by EM.

    With ``config.restarts > 1`` independent initialisations are run and
    the highest-likelihood model is returned.
    """
    config = config or EmConfig()
    if kind not in KINDS:
        raise ValidationError(f"unknown covariance kind {kind!r}")
    x = _as_points(points)
    n, d = x.shape
    if n == 0:
        raise ValidationError("cannot fit a mixture to an empty point set")
    if K < 1 or K > n:
        raise ValidationError(f"K={K} must lie in [1, N={n}]")
    if n < K * (d + 3):
        warnings.warn(f"only {n} points for K={K}, D={d}; estimates may be poor",
                      RuntimeWarning, stacklevel=2)
    floor = config.covariance_floor or default_floor(x)
    rng = np.random.default_rng(config.seed)
    best = None
    for r in range(config.restarts):
        model, report = _run_em(x, K, kind, config, floor, rng, r)
        if best is None or report.log_likelihoods[-1] > best[1].log_likelihoods[-1]:
            best = (model, report)
    return best if return_report else best[0]


def refit_full_covariances(model: GmmModel, points) -> GmmModel:
    """Full-covariance model sharing ``model``'s priors and means, with each
    covariance re-estimated under ``model``'s posteriors."""
    x = _as_points(points, model.D)
    resp = posteriors(model, x)
    mass = resp.sum(axis=0)
    covs = np.empty((model.K, model.D, model.D))
    for k in range(model.K):
        if mass[k] <= 0:
            covs[k] = model.covariances[k]
            continue
        diff = x - model.means[k]
        covs[k] = symmetrize((diff * (resp[:, k] / mass[k])[:, None]).T @ diff)
    return GmmModel.from_params(model.priors, model.means, covs, FULL, model.floor)


def subsample(points: np.ndarray, cap: int | None, rng: np.random.Generator) -> np.ndarray:
    if cap is None or points.shape[0] <= cap:
        return points
    return points[np.sort(rng.choice(points.shape[0], size=cap, replace=False))]
