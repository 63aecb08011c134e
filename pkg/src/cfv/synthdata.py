"""Deterministic synthetic data.

All generators draw from ``numpy.random.Generator(PCG64(seed))`` in a fixed
order, so output depends only on the seed and the size arguments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descriptors import DescriptorSet
from .errors import ValidationError


def rotation(axis: str, degrees: float) -> np.ndarray:
    t = np.deg2rad(degrees)
    c, s = np.cos(t), np.sin(t)
    if axis == "x":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    if axis == "y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


# Four elongated 3-D components laid out on a rectangle in the x-y plane.
# Each principal axis is turned by its own in-plane angle and tilt, so the
# components disagree with each other and with the pooled covariance.
FIGURE1_MEANS = np.array([[-4.0, -3.0, 0.0],
                          [4.0, -3.0, 0.5],
                          [-4.0, 3.0, -0.5],
                          [4.0, 3.0, 0.0]])
FIGURE1_STDS = np.array([1.5, 0.4, 0.3])
FIGURE1_ANGLES = ((35.0, 10.0), (-35.0, -15.0), (-60.0, 20.0), (60.0, -5.0))  # (in-plane, tilt)


def figure1_covariances() -> np.ndarray:
    covs = []
    for yaw, tilt in FIGURE1_ANGLES:
        r = rotation("z", yaw) @ rotation("x", tilt)
        covs.append(r @ np.diag(FIGURE1_STDS ** 2) @ r.T)
    return np.array(covs)


def figure1_dataset(seed: int = 0, n_per_component: int = 500) -> tuple[np.ndarray, np.ndarray]:
    """Points from four 3-D Gaussians whose principal axes point in
    different directions, with their true component labels."""
    if n_per_component < 10:
        raise ValidationError("n_per_component must be at least 10")
    rng = np.random.default_rng(seed)
    covs = figure1_covariances()
    points, labels = [], []
    for k in range(4):
        points.append(rng.multivariate_normal(FIGURE1_MEANS[k], covs[k], size=n_per_component,
                                              method="eigh"))
        labels.append(np.full(n_per_component, k))
    return np.concatenate(points), np.concatenate(labels)


# Two-class benchmark: both classes share component means, priors and
# per-axis spreads; each component correlates one pair of axes with
# coefficient +rho in class 0 and -rho in class 1. The means sit on a
# stretched tetrahedron whose scatter matrix is diagonal with well separated
# entries, so the pooled covariance is diagonal and PCA keeps the original
# axes instead of mixing them.
BENCH_AXIS_SCALE = np.array([6.0, 4.0, 2.5])
BENCH_MEANS = BENCH_AXIS_SCALE * np.array([[1.0, 1.0, 1.0],
                                           [1.0, -1.0, -1.0],
                                           [-1.0, 1.0, -1.0],
                                           [-1.0, -1.0, 1.0]])
BENCH_STDS = np.array([1.0, 0.8, 1.2])
BENCH_PAIRS = ((0, 1), (1, 2), (0, 2), (0, 1))
BENCH_RHO = 0.6


@dataclass(frozen=True)
class BenchmarkData:
    sets: list  # DescriptorSet per image
    labels: np.ndarray  # class per image
    components: list  # true component index per descriptor, per image

    @property
    def num_images(self) -> int:
        return len(self.sets)


def bench_covariance(k: int, rho: float) -> np.ndarray:
    corr = np.eye(3)
    i, j = BENCH_PAIRS[k]
    corr[i, j] = corr[j, i] = rho
    return corr * np.outer(BENCH_STDS, BENCH_STDS)


def twoclass_benchmark(seed: int = 0, images_per_class: int = 100,
                       descriptors_per_image: int = 200, rho: float = BENCH_RHO,
                       rho_jitter: float = 0.15, mean_jitter: float = 0.15) -> BenchmarkData:
    """Synthetic images whose classes differ only in the sign of the
    intra-component correlations.

    Every image draws its own correlation magnitude per component
    (``rho`` +/- ``rho_jitter``), a small shift of each component mean and
    its own component proportions, so images within a class are not
    identical. Images are ordered class 0 first.
    """
    if min(images_per_class, descriptors_per_image) < 1:
        raise ValidationError("image and descriptor counts must be positive")
    if not 0 < rho < 1 or rho + rho_jitter >= 1:
        raise ValidationError("rho (plus jitter) must stay inside (0, 1)")
    rng = np.random.default_rng(seed)
    K = BENCH_MEANS.shape[0]
    sets, labels, comps = [], [], []
    for cls, sign in ((0, 1.0), (1, -1.0)):
        for i in range(images_per_class):
            props = rng.dirichlet(np.full(K, 20.0))
            z = rng.choice(K, size=descriptors_per_image, p=props)
            x = np.empty((descriptors_per_image, 3))
            for k in range(K):
                r = sign * (rho + rng.uniform(-rho_jitter, rho_jitter))
                mu = BENCH_MEANS[k] + mean_jitter * rng.standard_normal(3)
                idx = np.flatnonzero(z == k)
                noise = rng.standard_normal((idx.size, 3))
                x[idx] = noise @ np.linalg.cholesky(bench_covariance(k, r)).T + mu
            sets.append(DescriptorSet(x, None, f"synth-c{cls}-{i:04d}"))
            labels.append(cls)
            comps.append(z)
    return BenchmarkData(sets, np.array(labels), comps)
