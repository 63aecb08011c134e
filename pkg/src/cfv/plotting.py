"""Report figures. Everything renders off-screen to files."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = {"fv": "#1f77b4", "cfv": "#d62728", "bow": "#7f7f7f"}
# fixed metadata keeps PNG bytes independent of the run date
_PNG_META = {"Software": None}


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def plot_accuracy_vs_k(rows: list[dict], path) -> None:
    """One panel per reduced dimension D, accuracy against K per encoder."""
    dims = sorted({r["D"] for r in rows})
    fig, axes = plt.subplots(1, len(dims), figsize=(4.2 * len(dims), 3.4), squeeze=False)
    for ax, D in zip(axes[0], dims):
        for enc in ("fv", "cfv"):
            sel = sorted((r for r in rows if r["D"] == D and r["encoder"] == enc),
                         key=lambda r: r["K"])
            if not sel:
                continue
            ks = [r["K"] for r in sel]
            mean = np.array([r["accuracy_mean"] for r in sel]) * 100
            std = np.array([r["accuracy_std"] for r in sel]) * 100
            ax.errorbar(ks, mean, yerr=std, marker="o", capsize=3, color=COLORS[enc],
                        label=enc.upper())
        ax.set_xscale("log", base=2)
        ax.set_xlabel("GMM components K")
        ax.set_ylabel("test accuracy (%)")
        ax.set_title(f"D = {D}")
        ax.grid(alpha=0.3)
        ax.legend()
    _save(fig, path)


def plot_correlation_histograms(hists: dict, path) -> None:
    """Bar chart per named histogram (e.g. ``{"train": h1, "test": h2}``)."""
    fig, axes = plt.subplots(1, len(hists), figsize=(4.2 * len(hists), 3.4), squeeze=False)
    for ax, (name, h) in zip(axes[0], hists.items()):
        widths = np.diff(h.bin_edges)
        ax.bar(h.bin_edges[:-1], h.frequencies, width=widths, align="edge",
               edgecolor="black", linewidth=0.5)
        ax.set_xlim(0, 1)
        ax.set_xlabel("|correlation coefficient|")
        ax.set_ylabel("average frequency")
        ax.set_title(f"{name}: {100 * h.mass_005_to_05:.1f}% in [0.05, 0.5]")
    _save(fig, path)


def _ellipse(ax, mean, cov, **kw) -> None:
    w, v = np.linalg.eigh(cov)
    t = np.linspace(0, 2 * np.pi, 100)
    circle = np.stack([np.cos(t), np.sin(t)])
    pts = (v * (2.0 * np.sqrt(np.maximum(w, 0)))) @ circle
    ax.plot(mean[0] + pts[0], mean[1] + pts[1], **kw)


def plot_figure1(diag, path) -> None:
    """3-D sample, its PCA projection with pooled and per-component
    two-sigma contours."""
    fig = plt.figure(figsize=(9, 4))
    ax3 = fig.add_subplot(1, 2, 1, projection="3d")
    for k in range(4):
        m = diag.labels == k
        ax3.scatter(*diag.points[m].T, s=3, alpha=0.5)
    ax3.set_title("3-D sample")
    ax = fig.add_subplot(1, 2, 2)
    n = diag.projected.shape[0]
    for k in range(4):
        m = diag.labels == k
        p = diag.projected[m]
        ax.scatter(p[:, 0], p[:, 1], s=3, alpha=0.4)
        _ellipse(ax, p.mean(0), np.cov(p.T, bias=True), color="black", lw=1)
    _ellipse(ax, diag.projected.mean(0), diag.projected.T @ diag.projected / n,
             color="blue", lw=2)
    ax.set_title("PCA projection")
    ax.set_aspect("equal", adjustable="datalim")
    _save(fig, path)


def plot_confusion(conf: np.ndarray, classes, path) -> None:
    fig, ax = plt.subplots(figsize=(1.0 + 0.5 * len(classes), 0.8 + 0.5 * len(classes)))
    ax.imshow(conf, cmap="Blues")
    for (i, j), v in np.ndenumerate(conf):
        ax.text(j, i, str(v), ha="center", va="center", fontsize=8)
    ax.set_xticks(range(len(classes)), [str(c) for c in classes], rotation=45)
    ax.set_yticks(range(len(classes)), [str(c) for c in classes])
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    _save(fig, path)
