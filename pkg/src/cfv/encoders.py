"""Aggregation of local descriptors into BoW, Fisher and completed Fisher
vectors.

Vector layout is fixed: every first-order block in ascending component
order, then every second-order block in ascending component order. A CFV
second-order block is the packed upper triangle of the whitened scatter
matrix: the diagonal first, then the strictly-upper entries row by row,
scaled by ``alpha``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import NumericError, ValidationError
from .gmm import DIAGONAL, GmmModel, posteriors, whitened_deviations

BOW = "bow"
FV = "fv"
CFV = "cfv"
ENCODER_KINDS = (BOW, FV, CFV)


@dataclass(frozen=True)
class EncodingConfig:
    alpha: float = 0.25
    gamma: float = 0.5
    apply_power_norm: bool = True
    apply_l2_norm: bool = True
    include_first_order: bool = True
    include_second_order: bool = True
    # divide CFV diagonals by sqrt(2) so they coincide with the FV's v block
    fv_compat_scale: bool = False
    # posteriors below this are treated as zero; 0 disables the shortcut
    posterior_threshold: float = 1e-8

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValidationError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not 0 <= self.gamma <= 1:
            raise ValidationError(f"gamma must lie in [0, 1], got {self.gamma!r}")
        if not (self.include_first_order or self.include_second_order):
            raise ValidationError("at least one of the first/second order blocks is required")
        if self.posterior_threshold < 0:
            raise ValidationError("posterior_threshold must be non-negative")

    def raw(self) -> "EncodingConfig":
        """Same blocks, with both normalisations switched off."""
        return EncodingConfig(**{**asdict(self), "apply_power_norm": False,
                                 "apply_l2_norm": False})


@dataclass(frozen=True)
class EncodedVector:
    values: np.ndarray
    kind: str
    K: int
    D: int
    config: EncodingConfig

    def __len__(self) -> int:
        return self.values.shape[0]


def encoded_length(kind: str, D: int, K: int, first: bool = True, second: bool = True) -> int:
    if kind == BOW:
        return K
    n = 0
    if first:
        n += D * K
    if second:
        n += D * K if kind == FV else D * (D + 1) // 2 * K
    return n


def pack_symmetric(V, alpha: float) -> np.ndarray:
    """``[diag(V), alpha * strict_upper(V)]`` with the upper part row-major."""
    V = np.asarray(V, dtype=np.float64)
    d = V.shape[0]
    iu = np.triu_indices(d, 1)
    return np.concatenate([np.diagonal(V).copy(), alpha * V[iu]])


def unpack_symmetric(packed, D: int, alpha: float) -> np.ndarray:
    packed = np.asarray(packed, dtype=np.float64)
    V = np.diag(packed[:D])
    iu = np.triu_indices(D, 1)
    V[iu] = packed[D:] / alpha
    V[(iu[1], iu[0])] = V[iu]
    return V


def power_normalize(v, gamma: float) -> np.ndarray:
    """Signed power ``|z|^gamma sign(z)``; zero stays zero for every gamma."""
    v = np.asarray(v, dtype=np.float64)
    if not 0 <= gamma <= 1:
        raise ValidationError(f"gamma must lie in [0, 1], got {gamma!r}")
    if gamma == 1:
        return v.copy()
    return np.sign(v) * np.abs(v) ** gamma


def l2_normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    return v / norm if norm > 1e-12 else v.copy()


def _postprocess(v: np.ndarray, config: EncodingConfig) -> np.ndarray:
    if not np.all(np.isfinite(v)):
        raise NumericError("encoding produced non-finite values")
    if config.apply_power_norm:
        v = power_normalize(v, config.gamma)
    if config.apply_l2_norm:
        v = l2_normalize(v)
    return v


def _check_descriptors(model: GmmModel, descriptors) -> np.ndarray:
    x = np.asarray(descriptors, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"descriptors must be an N x D matrix, got shape {x.shape}")
    if x.shape[0] == 0:
        raise ValidationError("cannot encode an empty descriptor set")
    if x.shape[1] != model.D:
        raise ValidationError(f"descriptor dimension {x.shape[1]} does not match model D={model.D}")
    if not np.all(np.isfinite(x)):
        raise NumericError("descriptors contain non-finite values")
    return x


def _active_rows(lam: np.ndarray, threshold: float) -> np.ndarray:
    if threshold > 0:
        return np.flatnonzero(lam >= threshold)
    return np.arange(lam.shape[0])


def encode_fv(model: GmmModel, descriptors, config: EncodingConfig | None = None) -> EncodedVector:
    """Fisher vector under a diagonal mixture.

    ``u_dk = sum_n lam_nk (x_dn - mu_dk)/sigma_dk / (N sqrt(pi_k))`` and
    ``v_dk = sum_n lam_nk [((x_dn - mu_dk)/sigma_dk)^2 - 1] / (N sqrt(2 pi_k))``.
    """
    config = config or EncodingConfig()
    if model.kind != DIAGONAL:
        raise ValidationError("encode_fv requires a diagonal-covariance GMM; "
                              f"got kind={model.kind!r} (use encode_cfv)")
    x = _check_descriptors(model, descriptors)
    n = x.shape[0]
    lam = posteriors(model, x)
    K, D = model.K, model.D
    u = np.zeros((K, D))
    v = np.zeros((K, D))
    for k in range(K):
        rows = _active_rows(lam[:, k], config.posterior_threshold)
        if rows.size == 0:
            continue
        lk = lam[rows, k]
        w = whitened_deviations(model, x[rows], k)
        u[k] = lk @ w / (n * np.sqrt(model.priors[k]))
        v[k] = lk @ (w * w - 1.0) / (n * np.sqrt(2.0 * model.priors[k]))
    blocks = []
    if config.include_first_order:
        blocks.append(u.reshape(-1))
    if config.include_second_order:
        blocks.append(v.reshape(-1))
    values = _postprocess(np.concatenate(blocks), config)
    return EncodedVector(values, FV, K, D, config)


def cfv_statistics(model: GmmModel, descriptors, threshold: float = 0.0
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Unpacked completed-FV statistics: first-order (K, D) and the whitened
    scatter deviations (K, D, D)."""
    x = _check_descriptors(model, descriptors)
    n = x.shape[0]
    lam = posteriors(model, x)
    K, D = model.K, model.D
    u = np.zeros((K, D))
    V = np.zeros((K, D, D))
    eye = np.eye(D)
    for k in range(K):
        rows = _active_rows(lam[:, k], threshold)
        if rows.size == 0:
            continue
        lk = lam[rows, k]
        w = whitened_deviations(model, x[rows], k)
        scale = n * np.sqrt(model.priors[k])
        u[k] = lk @ w / scale
        scatter = (w * lk[:, None]).T @ w
        scatter = 0.5 * (scatter + scatter.T)
        V[k] = (scatter - lk.sum() * eye) / scale
    return u, V


def encode_cfv(model: GmmModel, descriptors, config: EncodingConfig | None = None) -> EncodedVector:
    """Completed Fisher vector; accepts diagonal or full mixtures."""
    config = config or EncodingConfig()
    u, V = cfv_statistics(model, descriptors, config.posterior_threshold)
    K, D = model.K, model.D
    blocks = []
    if config.include_first_order:
        blocks.append(u.reshape(-1))
    if config.include_second_order:
        if config.fv_compat_scale:
            V = V.copy()
            idx = np.arange(D)
            V[:, idx, idx] /= np.sqrt(2.0)
        blocks.extend(pack_symmetric(V[k], config.alpha) for k in range(K))
    values = _postprocess(np.concatenate(blocks), config)
    return EncodedVector(values, CFV, K, D, config)


def encode_bow(model: GmmModel, descriptors, l2: bool = False) -> EncodedVector:
    """Soft-assignment histogram ``(1/N) sum_n lam_nk``; sums to one unless
    ``l2`` rescales it to unit Euclidean norm."""
    x = _check_descriptors(model, descriptors)
    lam = posteriors(model, x)
    values = lam.mean(axis=0)
    if l2:
        values = l2_normalize(values)
    config = EncodingConfig(apply_power_norm=False, apply_l2_norm=l2, posterior_threshold=0.0)
    return EncodedVector(values, BOW, model.K, model.D, config)


def encode(kind: str, model: GmmModel, descriptors, config: EncodingConfig | None = None,
           bow_l2: bool = False) -> EncodedVector:
    if kind == BOW:
        return encode_bow(model, descriptors, l2=bow_l2)
    if kind == FV:
        return encode_fv(model, descriptors, config)
    if kind == CFV:
        return encode_cfv(model, descriptors, config)
    raise ValidationError(f"unknown encoder kind {kind!r}; expected one of {ENCODER_KINDS}")
