"""Glue between the numerical modules: model fitting on pooled descriptors,
batch encoding, repeated-split classification and the synthetic benchmark."""
from __future__ import annotations

import csv
import io as _io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, classifier, encoders, gmm, linalg, synthdata
from .errors import ValidationError
from .seeding import stream, stream_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FittedModels:
    pca: linalg.PcaModel
    gmm: gmm.GmmModel


def fit_models(train_sets, pca_dim: int, K: int, kind: str, *, seed: int = 0,
               em: gmm.EmConfig | None = None, pca_whiten: bool = False,
               pca_cap: int | None = linalg.DEFAULT_PCA_SAMPLE_CAP,
               gmm_cap: int | None = gmm.DEFAULT_FIT_SAMPLE_CAP,
               refit_full: bool = False) -> FittedModels:
    """PCA on the pooled training descriptors, then a GMM on the projection.

    ``refit_full`` trains a diagonal GMM and re-estimates full covariances
    under its posteriors instead of running full-covariance EM.
    """
    pool = np.concatenate([np.asarray(getattr(s, "data", s), dtype=np.float64)
                           for s in train_sets])
    if pca_dim > pool.shape[1]:
        raise ValidationError(f"pca_dim {pca_dim} exceeds descriptor dimension {pool.shape[1]}")
    pca = linalg.pca_fit(pool, pca_dim, whiten=pca_whiten, sample_cap=pca_cap,
                         rng=stream(seed, "pca-subsample"))
    proj = linalg.pca_apply(pca, pool)
    proj = gmm.subsample(proj, gmm_cap, stream(seed, "gmm-subsample"))
    if proj.shape[0] < K:
        raise ValidationError(f"only {proj.shape[0]} descriptors for K={K}")
    em = em or gmm.EmConfig(seed=stream_seed(seed, "gmm-init"))
    if refit_full:
        diag = gmm.fit_em(proj, K, gmm.DIAGONAL, em)
        model = gmm.refit_full_covariances(diag, proj)
    else:
        model = gmm.fit_em(proj, K, kind, em)
    return FittedModels(pca, model)


def map_ordered(fn, items, workers: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool; output order
    always follows ``items``."""
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def encode_sets(models: FittedModels, sets, kind: str, config: encoders.EncodingConfig,
                workers: int = 1, bow_l2: bool = False) -> np.ndarray:
    def one(s):
        x = linalg.pca_apply(models.pca, np.asarray(getattr(s, "data", s)))
        return encoders.encode(kind, models.gmm, x, config, bow_l2=bow_l2).values

    return np.vstack(map_ordered(one, sets, workers))


def stratified_split(labels, train_fraction: float, rng: np.random.Generator):
    """Per-class random split; returns sorted (train, test) index arrays."""
    labels = np.asarray(labels)
    train, test = [], []
    for c in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        n_train = int(round(train_fraction * idx.size))
        n_train = min(max(n_train, 1), idx.size - 1) if idx.size > 1 else idx.size
        train.append(idx[:n_train])
        test.append(idx[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass
class SplitResult:
    accuracy: float
    evaluation: classifier.Evaluation
    model: classifier.LinearSvmModel


def classify_split(features: np.ndarray, labels, train_idx, test_idx,
                   config: classifier.TrainConfig) -> SplitResult:
    labels = np.asarray(labels)
    model = classifier.train_ova(features[train_idx], labels[train_idx].tolist(), config)
    ev = classifier.evaluate(model, features[test_idx], labels[test_idx].tolist())
    return SplitResult(ev.accuracy, ev, model)


# -- synthetic benchmark ---------------------------------------------------

@dataclass(frozen=True)
class SynthBenchConfig:
    seed: int = 0
    dims: tuple = (3,)
    ks: tuple = (2, 4, 8, 16)
    images_per_class: int = 100
    descriptors_per_image: int = 200
    train_fraction: float = 0.5
    splits: int = 1
    encoding: encoders.EncodingConfig = field(default_factory=encoders.EncodingConfig)
    train: classifier.TrainConfig = field(default_factory=classifier.TrainConfig)
    workers: int = 1


REPORT_FIELDS = ("encoder", "D", "K", "accuracy_mean", "accuracy_std", "splits",
                 "cfv_minus_fv", "alpha", "gamma", "seed")


def run_synth_bench(cfg: SynthBenchConfig) -> list[dict]:
    """FV (diagonal GMM) against CFV (full GMM) over the (D, K) grid.

    Both encoders share the split, the PCA and the SVM settings; only the
    covariance kind of the GMM and the encoder differ.
    """
    data = synthdata.twoclass_benchmark(stream_seed(cfg.seed, "synth"), cfg.images_per_class,
                                        cfg.descriptors_per_image)
    split_rng = stream(cfg.seed, "split")
    splits = [stratified_split(data.labels, cfg.train_fraction, split_rng)
              for _ in range(cfg.splits)]
    train_cfg = classifier.TrainConfig(cfg.train.C, cfg.train.max_epochs, cfg.train.tolerance,
                                       stream_seed(cfg.seed, "svm-shuffle"))
    rows = []
    for D in cfg.dims:
        for K in cfg.ks:
            acc = {}
            for enc, kind in ((encoders.FV, gmm.DIAGONAL), (encoders.CFV, gmm.FULL)):
                per_split = []
                for s, (tr, te) in enumerate(splits):
                    t0 = time.perf_counter()
                    models = fit_models([data.sets[i] for i in tr], D, K, kind,
                                        seed=cfg.seed + s)
                    feats = encode_sets(models, data.sets, enc, cfg.encoding, cfg.workers)
                    res = classify_split(feats, data.labels, tr, te, train_cfg)
                    per_split.append(res.accuracy)
                    log.info("%s D=%d K=%d split %d: %.4f (%.1fs)", enc, D, K, s, res.accuracy,
                             time.perf_counter() - t0)
                acc[enc] = per_split
            gap = float(np.mean(acc[encoders.CFV]) - np.mean(acc[encoders.FV]))
            for enc in (encoders.FV, encoders.CFV):
                rows.append({"encoder": enc, "D": D, "K": K,
                             "accuracy_mean": float(np.mean(acc[enc])),
                             "accuracy_std": float(np.std(acc[enc])),
                             "splits": cfg.splits, "cfv_minus_fv": gap,
                             "alpha": cfg.encoding.alpha, "gamma": cfg.encoding.gamma,
                             "seed": cfg.seed})
    return rows


def emit_benchmark(cfg: SynthBenchConfig, out_dir) -> Path:
    """Write the benchmark images as CFVD files plus a manifest carrying the
    first split; returns the manifest path."""
    from . import io

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = synthdata.twoclass_benchmark(stream_seed(cfg.seed, "synth"), cfg.images_per_class,
                                        cfg.descriptors_per_image)
    tr, _ = stratified_split(data.labels, cfg.train_fraction, stream(cfg.seed, "split"))
    train = set(tr.tolist())
    rows = []
    for i, ds in enumerate(data.sets):
        path = out / f"{ds.source_id}.cfvd"
        io.save_descriptors(ds, path)
        rows.append({"path": str(path), "label": str(data.labels[i]),
                     "split": "train" if i in train else "test"})
    manifest = out / "manifest.csv"
    io.write_manifest(rows, manifest, ("path", "label", "split"))
    return manifest


def rows_to_csv(rows: list[dict], fields=REPORT_FIELDS) -> str:
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                    for k, v in row.items()})
    return buf.getvalue()


@dataclass(frozen=True)
class Figure1Diagnostics:
    points: np.ndarray
    labels: np.ndarray
    pca: linalg.PcaModel
    projected: np.ndarray
    universal_offdiag: float  # max |off-diagonal| of the projected pooled covariance
    component_rho: np.ndarray  # (4,) true-component correlation of the two PCA axes
    histogram: analysis.CorrelationHistogram
    gmm: gmm.GmmModel


def figure1_diagnostics(seed: int = 0, n_per_component: int = 500, pca_dim: int = 2,
                        images: int = 10) -> Figure1Diagnostics:
    """Universal PCA on the four-component dataset, then the per-component
    correlations it leaves behind.

    The histogram splits the points into ``images`` random pseudo-images
    and uses a full K=4 GMM fitted to the projection.
    """
    points, labels = synthdata.figure1_dataset(seed, n_per_component)
    pca = linalg.pca_fit(points, pca_dim)
    proj = linalg.pca_apply(pca, points)
    n = proj.shape[0]
    _, cov = linalg.weighted_moments(proj, np.full(n, 1.0 / n))
    off = float(np.max(np.abs(cov - np.diag(np.diag(cov)))))
    rho = []
    for k in range(4):
        mask = labels == k
        cc = analysis.weighted_correlation(proj[mask], np.full(mask.sum(), 1.0))
        rho.append(cc.rho[0, 1])
    model = gmm.fit_em(proj, 4, gmm.FULL, gmm.EmConfig(seed=seed))
    order = np.random.default_rng(seed).permutation(n)
    chunks = [proj[idx] for idx in np.array_split(order, images)]
    hist = analysis.correlation_histogram(model, chunks)
    return Figure1Diagnostics(points, labels, pca, proj, off, np.array(rho), hist, model)
