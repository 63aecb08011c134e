"""Symmetric dense linear algebra: weighted moments, eigendecomposition,
inverse square roots and PCA.

Symmetric matrices are plain ``float64`` ndarrays; :func:`symmetrize`
enforces the mirror ``m[i, j] == m[j, i]`` exactly by copying the upper
triangle onto the lower one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError

DEFAULT_PCA_SAMPLE_CAP = 200_000


def symmetrize(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValidationError(f"expected a non-empty square matrix, got shape {m.shape}")
    iu = np.triu_indices(m.shape[0], 1)
    m[(iu[1], iu[0])] = m[iu]
    return m


def _check_finite(m: np.ndarray, what: str = "matrix") -> None:
    if not np.all(np.isfinite(m)):
        raise NumericError(f"{what} contains non-finite entries")


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # column i pairs with eigenvalues[i]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return symmetrize((v * self.eigenvalues) @ v.T)


def weighted_moments(points, weights) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population covariance of ``points`` under a probability mass.

    ``weights`` must be non-negative and sum to one (within 1e-9).
    """
    x = np.asarray(points, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValidationError(f"points must be a non-empty N x D matrix, got shape {x.shape}")
    if w.ndim != 1 or w.shape[0] != x.shape[0]:
        raise ValidationError(f"weights length {w.shape} does not match {x.shape[0]} points")
    if np.any(w < 0):
        raise ValidationError("weights must be non-negative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValidationError(f"weights sum to {w.sum()!r}, expected 1")
    _check_finite(x, "points")
    mean = w @ x
    centered = x - mean
    cov = (centered * w[:, None]).T @ centered
    return mean, symmetrize(cov)


def eigh(m) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Each eigenvector is signed so its largest-magnitude entry is positive.
    """
    m = symmetrize(m)
    _check_finite(m)
    w, v = np.linalg.eigh(m)
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    v *= signs
    return EigenDecomposition(w, v)


def default_eigen_floor(m: np.ndarray) -> float:
    m = np.asarray(m, dtype=np.float64)
    floor = 1e-6 * float(np.trace(m)) / m.shape[0]
    # a zero or negative trace still needs a usable positive floor
    return floor if floor > 0 else 1e-12


def inv_sqrt(m, eigen_floor: float | None = None) -> np.ndarray:
    """Symmetric inverse square root ``V diag(max(w, floor)^-1/2) V^T``."""
    m = symmetrize(m)
    if eigen_floor is None:
        eigen_floor = default_eigen_floor(m)
    if not eigen_floor > 0:
        raise ValidationError(f"eigen_floor must be positive, got {eigen_floor!r}")
    dec = eigh(m)
    scale = np.maximum(dec.eigenvalues, eigen_floor) ** -0.5
    v = dec.eigenvectors
    return symmetrize((v * scale) @ v.T)


def sqrt_psd(m) -> np.ndarray:
    """Symmetric square root of a positive semidefinite matrix."""
    dec = eigh(m)
    v = dec.eigenvectors
    return symmetrize((v * np.sqrt(np.maximum(dec.eigenvalues, 0.0))) @ v.T)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    basis: np.ndarray  # input_dim x output_dim, orthonormal columns
    eigenvalues: np.ndarray
    whiten: bool = False

    @property
    def input_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def output_dim(self) -> int:
        return self.basis.shape[1]


def pca_fit(points, output_dim: int, *, whiten: bool = False,
            sample_cap: int | None = DEFAULT_PCA_SAMPLE_CAP,
            rng: np.random.Generator | None = None) -> PcaModel:
    """Fit PCA on the universal (pooled) covariance of ``points``.

    When there are more than ``sample_cap`` rows a uniform subsample is used;
    ``rng`` drives that draw. ``whiten`` additionally rescales each output
    axis by the inverse square root of its variance in :func:`pca_apply`.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"points must be 2-D, got shape {x.shape}")
    n, d = x.shape
    if not 1 <= output_dim <= d:
        raise ValidationError(f"output_dim {output_dim} must lie in [1, {d}]")
    if n <= output_dim:
        raise ValidationError(f"need more than output_dim={output_dim} points, got {n}")
    _check_finite(x, "points")
    if sample_cap is not None and n > sample_cap:
        rng = rng if rng is not None else np.random.default_rng(0)
        x = x[np.sort(rng.choice(n, size=sample_cap, replace=False))]
        n = sample_cap
    if np.all(x == x[0]):
        raise ValidationError("degenerate input: all points identical")
    mean, cov = weighted_moments(x, np.full(n, 1.0 / n))
    dec = eigh(cov)
    vals = np.maximum(dec.eigenvalues[:output_dim], 0.0)
    return PcaModel(mean=mean, basis=dec.eigenvectors[:, :output_dim].copy(),
                    eigenvalues=vals, whiten=whiten)


def pca_apply(model: PcaModel, points) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValidationError(
            f"points of shape {x.shape} do not match PCA input_dim {model.input_dim}")
    y = (x - model.mean) @ model.basis
    if model.whiten:
        y = y / np.sqrt(np.maximum(model.eigenvalues, 1e-12))
    return y


def pca_reconstruct(model: PcaModel, projected) -> np.ndarray:
    y = np.asarray(projected, dtype=np.float64)
    if model.whiten:
        y = y * np.sqrt(np.maximum(model.eigenvalues, 1e-12))
    return y @ model.basis.T + model.mean
