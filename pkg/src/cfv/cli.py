"""Command-line driver.

Subcommands: extract, train-models, encode, classify, analyze, synth-bench.
Any option can also come from a ``key = value`` file given with
``--config``; keys are option names with dashes or underscores. Options
given on the command line win. Exit codes: 0 ok, 2 validation error,
3 data/format error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, classifier, descriptors, encoders, gmm, io, linalg, pipeline
from .errors import CfvError, FormatError, ValidationError

log = logging.getLogger("cfv")

IMAGE_SUFFIXES = {".png", ".ppm", ".pgm", ".pnm"}
_BOOL_OPTIONS = {"power_norm", "l2_norm", "first_order", "second_order", "fv_compat_scale",
                 "pca_whiten", "refit_full", "bow_l2", "text", "no_figures", "emit_descriptors"}


def parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"not a boolean: {value!r}")


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read config file {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{n}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in str(text).replace(" ", "").split(",") if t)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


# -- argument parsing ------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int, default=0, help="root seed for every random stream")
    p.add_argument("--workers", type=int, default=1, help="worker threads over images")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _encoding_opts(p: argparse.ArgumentParser, defaults_from_container: bool = False) -> None:
    d = None if defaults_from_container else encoders.EncodingConfig()
    p.add_argument("--alpha", type=float, default=None if d is None else d.alpha,
                   help="weight of the off-diagonal second-order entries (default 0.25)")
    p.add_argument("--gamma", type=float, default=None if d is None else d.gamma,
                   help="power-normalisation exponent (default 0.5)")
    for name, default in (("power-norm", True), ("l2-norm", True), ("first-order", True),
                          ("second-order", True), ("fv-compat-scale", False)):
        p.add_argument(f"--{name}", action=argparse.BooleanOptionalAction,
                       default=None if d is None else default)
    p.add_argument("--posterior-threshold", type=float,
                   default=None if d is None else d.posterior_threshold)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfv", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="dense descriptors for a directory of images")
    _common(p)
    p.add_argument("--input", help="directory of PNG/PPM/PGM images")
    p.add_argument("--list", help="CSV (path,label) of images instead of --input")
    p.add_argument("--labels", help="sidecar CSV with path,label columns")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--descriptor", choices=sorted(descriptors.EXTRACTORS), default="gradhist")
    p.add_argument("--scales", type=int, default=7)
    p.add_argument("--ratio-max", type=float, default=2.0)
    p.add_argument("--scale-factor", type=float, default=float(np.sqrt(2.0)))
    p.add_argument("--patch", type=int, default=16, help="LBP patch size")
    p.add_argument("--step", type=int, default=None, help="grid step (lbp 8, gradhist 4)")
    p.add_argument("--bins", type=int, default=8)
    p.add_argument("--cells", type=int, default=4)
    p.add_argument("--cell-px", type=int, default=4)

    p = sub.add_parser("train-models", help="fit PCA and GMM on training descriptors")
    _common(p)
    p.add_argument("--manifest", required=True, help="descriptor manifest (path,label[,split])")
    p.add_argument("--output", required=True, help="model container path")
    p.add_argument("--encoder", choices=encoders.ENCODER_KINDS, default=encoders.CFV)
    p.add_argument("--pca-dim", type=int, required=True)
    p.add_argument("-K", "--components", type=int, required=True, dest="components")
    p.add_argument("--covariance", choices=gmm.KINDS, default=None,
                   help="default: diagonal for fv/bow, full for cfv")
    p.add_argument("--refit-full", action="store_true",
                   help="full covariances re-estimated from a diagonal fit")
    p.add_argument("--pca-whiten", action="store_true")
    p.add_argument("--pca-cap", type=int, default=linalg.DEFAULT_PCA_SAMPLE_CAP)
    p.add_argument("--gmm-cap", type=int, default=gmm.DEFAULT_FIT_SAMPLE_CAP)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--covariance-floor", type=float, default=None)
    _encoding_opts(p)

    p = sub.add_parser("encode", help="encode descriptor files with a trained container")
    _common(p)
    p.add_argument("--container", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--encoder", choices=encoders.ENCODER_KINDS, default=encoders.CFV)
    p.add_argument("--bow-l2", action="store_true")
    p.add_argument("--text", action="store_true", help="also write vectors.txt")
    _encoding_opts(p, defaults_from_container=True)

    p = sub.add_parser("classify", help="one-versus-all linear SVM on encoded vectors")
    _common(p)
    p.add_argument("--manifest", required=True, help="encoded manifest (path,label[,split])")
    p.add_argument("--output", required=True, help="report directory")
    p.add_argument("--repeats", type=int, default=10, help="random splits when no split column")
    p.add_argument("--train-fraction", type=float, default=None)
    p.add_argument("-C", type=float, default=1.0, dest="C")
    p.add_argument("--max-epochs", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--model-out", help="write the first split's SVM into this container")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("analyze", help="intra-component correlation histograms")
    _common(p)
    p.add_argument("--container", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--weighting", choices=("uniform", "mass"), default="uniform")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("synth-bench", help="FV vs CFV on synthetic two-class data")
    _common(p)
    p.add_argument("--output", required=True)
    p.add_argument("--dims", type=int_list, default=(3,))
    p.add_argument("--ks", type=int_list, default=(2, 4, 8, 16))
    p.add_argument("--images-per-class", type=int, default=100)
    p.add_argument("--descriptors-per-image", type=int, default=200)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--splits", type=int, default=1)
    p.add_argument("-C", type=float, default=1.0, dest="C")
    p.add_argument("--emit-descriptors", action="store_true",
                   help="also write the benchmark as CFVD files plus manifest")
    p.add_argument("--no-figures", action="store_true")
    _encoding_opts(p)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # config values become subcommand defaults, so read --config before the
    # real parse (otherwise required options given only in the file fail)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    subparsers = parser._subparsers._group_actions[0].choices
    if known.config and command in subparsers:
        values = read_config_file(known.config)
        sub = subparsers[command]
        actions = {a.dest: a for a in sub._actions}
        unknown = set(values) - set(actions) - {"config"}
        if unknown:
            raise ValidationError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        for key in values:
            actions[key].required = False
        sub.set_defaults(**values)
    args = parser.parse_args(argv)
    for name in _BOOL_OPTIONS:
        if isinstance(getattr(args, name, None), str):
            setattr(args, name, parse_bool(getattr(args, name)))
    return args


# -- helpers ---------------------------------------------------------------

def _positive(args, *names) -> None:
    for n in names:
        v = getattr(args, n, None)
        if v is not None and not v > 0:
            raise ValidationError(f"--{n.replace('_', '-')} must be positive, got {v!r}")


def _encoding_config(args, base: encoders.EncodingConfig | None = None) -> encoders.EncodingConfig:
    base = base or encoders.EncodingConfig()

    def pick(attr, field):
        v = getattr(args, attr, None)
        return getattr(base, field) if v is None else v

    return encoders.EncodingConfig(
        alpha=pick("alpha", "alpha"), gamma=pick("gamma", "gamma"),
        apply_power_norm=pick("power_norm", "apply_power_norm"),
        apply_l2_norm=pick("l2_norm", "apply_l2_norm"),
        include_first_order=pick("first_order", "include_first_order"),
        include_second_order=pick("second_order", "include_second_order"),
        fv_compat_scale=pick("fv_compat_scale", "fv_compat_scale"),
        posterior_threshold=pick("posterior_threshold", "posterior_threshold"))


def _descriptor_dim(path) -> int:
    with open(path, "rb") as fh:
        head = fh.read(io._DESC_HEADER.size)
    if len(head) < io._DESC_HEADER.size or head[:4] != io.DESCRIPTOR_MAGIC:
        raise FormatError(f"{path} is not a descriptor file")
    return io._DESC_HEADER.unpack(head)[3]


def _train_rows(rows):
    if rows and "split" in rows[0] and rows[0]["split"] is not None:
        sel = [r for r in rows if r["split"] == "train"]
        if not sel:
            raise ValidationError("manifest has a split column but no 'train' rows")
        return sel
    return rows


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# -- commands --------------------------------------------------------------

def cmd_extract(args) -> int:
    _positive(args, "scales", "ratio_max", "scale_factor", "patch", "step", "bins", "cells",
              "cell_px", "workers")
    if bool(args.input) == bool(args.list):
        raise ValidationError("give exactly one of --input or --list")
    if args.list:
        listed = io.read_manifest(args.list)
        images = [Path(r["path"]) for r in listed]
        labels = {str(Path(r["path"]).resolve()): r.get("label", "") for r in listed}
    else:
        src = Path(args.input)
        if not src.is_dir():
            raise ValidationError(f"--input {src} is not a directory")
        images = sorted(p for p in src.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        labels = {}
    if not images:
        raise ValidationError(f"found 0 images in {args.input or args.list}")
    if args.labels:
        labels = {str(Path(r["path"]).resolve()): r.get("label", "")
                  for r in io.read_manifest(args.labels)}
        missing = [str(p) for p in images if str(p.resolve()) not in labels]
        if missing:
            raise FormatError(f"{len(missing)} image(s) have no label, e.g. {missing[0]}")
    stems = [p.stem for p in images]
    if len(set(stems)) != len(stems):
        raise ValidationError("image file names (without suffix) must be unique")

    if args.descriptor == "lbp":
        step = args.step or 8
        base = lambda im: descriptors.dense_lbp(im, args.patch, step)  # noqa: E731
    else:
        step = args.step or 4
        base = lambda im: descriptors.dense_gradhist(  # noqa: E731
            im, args.bins, args.cells, args.cell_px, step)

    out = _out_dir(args.output)

    def one(path: Path):
        image = descriptors.load_image(path)
        if args.descriptor == "lbp" and image.channels == 1:
            image = descriptors.Image(np.repeat(image.pixels, 3, axis=2))
        ds = descriptors.multiscale(image, base, args.scales, args.ratio_max, args.scale_factor)
        target = out / f"{path.stem}.cfvd"
        io.save_descriptors(ds, target)
        return {"path": str(target), "label": labels.get(str(path.resolve()), ""),
                "count": ds.count}

    rows = pipeline.map_ordered(one, images, args.workers)
    io.write_manifest(rows, out / "manifest.csv")
    print(f"extracted {sum(r['count'] for r in rows)} descriptors from {len(rows)} image(s) "
          f"-> {out / 'manifest.csv'}")
    return 0


def cmd_train_models(args) -> int:
    _positive(args, "pca_dim", "components", "pca_cap", "gmm_cap", "max_iters", "rel_tol",
              "restarts", "covariance_floor")
    enc = _encoding_config(args)
    rows = _train_rows(io.read_manifest(args.manifest))
    if not rows:
        raise ValidationError("descriptor manifest is empty")
    dim = _descriptor_dim(rows[0]["path"])
    if args.pca_dim > dim:
        raise ValidationError(f"--pca-dim {args.pca_dim} exceeds descriptor dimension {dim}")
    kind = args.covariance or (gmm.FULL if args.encoder == encoders.CFV else gmm.DIAGONAL)
    if args.encoder == encoders.FV and (kind == gmm.FULL or args.refit_full):
        raise ValidationError("fv encoding needs a diagonal GMM; drop --covariance full/--refit-full")
    sets = [io.load_descriptors(r["path"]) for r in rows]
    total = sum(s.count for s in sets)
    if total < args.components or total <= args.pca_dim:
        raise ValidationError(f"{total} training descriptors are too few for K={args.components}, "
                              f"D={args.pca_dim}")
    em = gmm.EmConfig(max_iters=args.max_iters, rel_tol=args.rel_tol,
                      covariance_floor=args.covariance_floor,
                      seed=pipeline.stream_seed(args.seed, "gmm-init"), restarts=args.restarts)
    models = pipeline.fit_models(sets, args.pca_dim, args.components, kind, seed=args.seed, em=em,
                                 pca_whiten=args.pca_whiten, pca_cap=args.pca_cap,
                                 gmm_cap=args.gmm_cap, refit_full=args.refit_full)
    meta = {"encoder": args.encoder, "seed": args.seed, "training_descriptors": total,
            "refit_full": bool(args.refit_full)}
    io.save_container(args.output, {"pca": models.pca, "gmm": models.gmm, "encoding": enc}, meta)
    print(f"trained PCA {dim}->{args.pca_dim} and {models.gmm.kind} GMM K={models.gmm.K} "
          f"on {total} descriptors -> {args.output}")
    return 0


def cmd_encode(args) -> int:
    _positive(args, "workers")
    sections, _ = io.load_container(args.container)
    if "pca" not in sections or "gmm" not in sections:
        raise ValidationError("container lacks a pca or gmm section")
    models = pipeline.FittedModels(sections["pca"], sections["gmm"])
    config = _encoding_config(args, sections.get("encoding"))
    if args.encoder == encoders.FV and models.gmm.kind != gmm.DIAGONAL:
        raise ValidationError(f"fv encoding requires a diagonal GMM but the container holds a "
                              f"{models.gmm.kind}-covariance GMM; use --encoder cfv")
    rows = io.read_manifest(args.manifest)
    if not rows:
        raise ValidationError("descriptor manifest is empty")
    out = _out_dir(args.output)

    def one(row):
        ds = io.load_descriptors(row["path"])
        if ds.dim != models.pca.input_dim:
            raise ValidationError(f"{row['path']}: descriptor dimension {ds.dim} does not match "
                                  f"the container's PCA input {models.pca.input_dim}")
        x = linalg.pca_apply(models.pca, ds.data)
        ev = encoders.encode(args.encoder, models.gmm, x, config, bow_l2=args.bow_l2)
        target = out / (Path(row["path"]).stem + ".cfve")
        io.save_encoded(ev, target)
        return {**row, "path": str(target)}, ev.values

    results = pipeline.map_ordered(one, rows, args.workers)
    fields = ["path", "label"] + (["split"] if "split" in rows[0] else [])
    io.write_manifest([r for r, _ in results], out / "manifest.csv", fields)
    if args.text:
        io.write_vectors_text([v for _, v in results], out / "vectors.txt")
    print(f"encoded {len(results)} file(s) as {args.encoder} "
          f"(length {results[0][1].size}) -> {out / 'manifest.csv'}")
    return 0


def cmd_classify(args) -> int:
    _positive(args, "repeats", "C", "max_epochs", "tolerance")
    rows = io.read_manifest(args.manifest)
    if len(rows) < 2:
        raise ValidationError("need at least two encoded vectors")
    has_split = "split" in rows[0] and all(r.get("split") for r in rows)
    if not has_split and args.train_fraction is None:
        raise ValidationError("missing split definitions: add a split column to the manifest "
                              "or pass --train-fraction")
    if args.train_fraction is not None and not 0 < args.train_fraction < 1:
        raise ValidationError("--train-fraction must lie in (0, 1)")
    vecs = [io.load_encoded(r["path"]) for r in rows]
    first = vecs[0]
    if any(len(v) != len(first) or v.kind != first.kind for v in vecs):
        raise FormatError("encoded vectors differ in length or encoder kind")
    feats = np.vstack([v.values for v in vecs])
    labels = np.array([r["label"] for r in rows])
    train_cfg = classifier.TrainConfig(args.C, args.max_epochs, args.tolerance,
                                       pipeline.stream_seed(args.seed, "svm-shuffle"))
    if has_split:
        split_col = np.array([r["split"] for r in rows])
        if not {"train", "test"} <= set(split_col.tolist()):
            raise ValidationError("split column must contain both 'train' and 'test' rows")
        splits = [(np.flatnonzero(split_col == "train"), np.flatnonzero(split_col == "test"))]
    else:
        rng = pipeline.stream(args.seed, "split")
        splits = [pipeline.stratified_split(labels, args.train_fraction, rng)
                  for _ in range(args.repeats)]
    results = [pipeline.classify_split(feats, labels, tr, te, train_cfg) for tr, te in splits]
    accs = np.array([r.accuracy for r in results])
    out = _out_dir(args.output)
    prov = {"encoder": first.kind, "K": first.K, "D": first.D, "alpha": first.config.alpha,
            "gamma": first.config.gamma}
    split_rows = [{"split": i, "accuracy": r.accuracy, **prov} for i, r in enumerate(results)]
    (out / "splits.csv").write_text(pipeline.rows_to_csv(split_rows, list(split_rows[0])))
    summary = {**prov, "splits": len(results), "accuracy_mean": float(accs.mean()),
               "accuracy_std": float(accs.std())}
    (out / "summary.csv").write_text(pipeline.rows_to_csv([summary], list(summary)))
    classes = results[0].evaluation.classes
    conf = sum(r.evaluation.confusion for r in results)
    per_class = np.diag(conf) / np.maximum(conf.sum(axis=1), 1)
    pc_rows = [{"class": c, "accuracy": float(a), "count": int(n)}
               for c, a, n in zip(classes, per_class, conf.sum(axis=1))]
    (out / "per_class.csv").write_text(pipeline.rows_to_csv(pc_rows, ["class", "accuracy", "count"]))
    conf_rows = [{"true": c, **{str(p): int(v) for p, v in zip(classes, row)}}
                 for c, row in zip(classes, conf)]
    (out / "confusion.csv").write_text(
        pipeline.rows_to_csv(conf_rows, ["true"] + [str(c) for c in classes]))
    if args.model_out:
        io.save_container(args.model_out, {"svm": results[0].model}, prov)
    if not args.no_figures:
        from . import plotting
        plotting.plot_confusion(conf, classes, out / "confusion.png")
    print(f"{first.kind} K={first.K} D={first.D}: accuracy {100 * accs.mean():.2f} "
          f"+/- {100 * accs.std():.2f} % over {len(results)} split(s)")
    return 0


def _histogram_table(h: analysis.CorrelationHistogram) -> str:
    lines = [f"# K={h.K} D={h.D} images={h.num_images} pairs={h.num_pairs} "
             f"weighting={h.metadata.get('weighting')}",
             f"# mass_below_0.05={float(h.mass_below_005)!r} "
             f"mass_0.05_to_0.5={float(h.mass_005_to_05)!r}",
             "# bin_low bin_high frequency"]
    for lo, hi, f in zip(h.bin_edges[:-1], h.bin_edges[1:], h.frequencies):
        lines.append(f"{float(lo)!r} {float(hi)!r} {float(f)!r}")
    return "\n".join(lines) + "\n"


def read_histogram_table(path) -> tuple[np.ndarray, np.ndarray]:
    rows = [line.split() for line in Path(path).read_text().splitlines()
            if line.strip() and not line.startswith("#")]
    arr = np.array(rows, dtype=np.float64)
    return np.append(arr[:, 0], arr[-1, 1]), arr[:, 2]


def cmd_analyze(args) -> int:
    _positive(args, "bins")
    sections, _ = io.load_container(args.container)
    if "pca" not in sections or "gmm" not in sections:
        raise ValidationError("container lacks a pca or gmm section")
    pca, model = sections["pca"], sections["gmm"]
    rows = io.read_manifest(args.manifest)
    if not rows:
        raise ValidationError("descriptor manifest is empty")
    groups: dict[str, list] = {}
    for r in rows:
        groups.setdefault(r.get("split") or "all", []).append(r["path"])
    out = _out_dir(args.output)
    hists = {}
    summary = []
    for name in sorted(groups):
        sets = [linalg.pca_apply(pca, io.load_descriptors(p).data) for p in groups[name]]
        h = analysis.correlation_histogram(model, sets, args.bins, args.weighting)
        hists[name] = h
        table = _histogram_table(h)
        (out / f"hist_{name}.txt").write_text(table)
        (out / f"hist_{name}.dat").write_text(table)
        summary.append({"split": name, "images": h.num_images, "pairs": h.num_pairs,
                        "mass_below_0.05": h.mass_below_005,
                        "mass_0.05_to_0.5": h.mass_005_to_05,
                        "mass_above_0.5": 1.0 - h.mass_below_005 - h.mass_005_to_05})
        print(f"{name}: {100 * h.mass_below_005:.2f}% of |rho| below 0.05, "
              f"{100 * h.mass_005_to_05:.2f}% within [0.05, 0.5]")
    (out / "summary.csv").write_text(pipeline.rows_to_csv(summary, list(summary[0])))
    if not args.no_figures:
        from . import plotting
        plotting.plot_correlation_histograms(hists, out / "correlation_histograms.png")
    return 0


def cmd_synth_bench(args) -> int:
    _positive(args, "images_per_class", "descriptors_per_image", "splits", "C", "workers")
    if not args.dims or not args.ks or min(args.dims + args.ks) < 1:
        raise ValidationError("--dims and --ks need positive integers")
    if max(args.dims) > 3:
        raise ValidationError("the synthetic benchmark is 3-dimensional; --dims must be <= 3")
    if not 0 < args.train_fraction < 1:
        raise ValidationError("--train-fraction must lie in (0, 1)")
    cfg = pipeline.SynthBenchConfig(
        seed=args.seed, dims=tuple(args.dims), ks=tuple(args.ks),
        images_per_class=args.images_per_class, descriptors_per_image=args.descriptors_per_image,
        train_fraction=args.train_fraction, splits=args.splits,
        encoding=_encoding_config(args), train=classifier.TrainConfig(C=args.C),
        workers=args.workers)
    out = _out_dir(args.output)
    rows = pipeline.run_synth_bench(cfg)
    (out / "report.csv").write_text(pipeline.rows_to_csv(rows))
    fig1 = pipeline.figure1_diagnostics(args.seed)
    f1 = {"universal_max_offdiag": fig1.universal_offdiag,
          **{f"component{k}_rho": float(r) for k, r in enumerate(fig1.component_rho)},
          "hist_mass_below_0.05": fig1.histogram.mass_below_005,
          "hist_mass_0.05_to_0.5": fig1.histogram.mass_005_to_05}
    (out / "figure1.csv").write_text(pipeline.rows_to_csv([f1], list(f1)))
    if args.emit_descriptors:
        pipeline.emit_benchmark(cfg, out / "descriptors")
    if not args.no_figures:
        from . import plotting
        plotting.plot_accuracy_vs_k(rows, out / "accuracy_vs_k.png")
        plotting.plot_figure1(fig1, out / "figure1.png")
        plotting.plot_correlation_histograms({"figure1": fig1.histogram},
                                             out / "figure1_correlations.png")
    for D in cfg.dims:
        for K in cfg.ks:
            acc = {r["encoder"]: r["accuracy_mean"] for r in rows if r["D"] == D and r["K"] == K}
            print(f"D={D} K={K:>3}: FV {100 * acc['fv']:6.2f}%  CFV {100 * acc['cfv']:6.2f}%")
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "train-models": cmd_train_models,
    "encode": cmd_encode,
    "classify": cmd_classify,
    "analyze": cmd_analyze,
    "synth-bench": cmd_synth_bench,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except CfvError as exc:
        print(f"cfv: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except argparse.ArgumentTypeError as exc:
        print(f"cfv: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
