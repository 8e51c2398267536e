"""Command-line interface: every pipeline as a subcommand.

All stochastic behavior is controlled by explicit ``--seed`` flags, numeric
output is fixed at six decimal places, and environment variables are never
consulted, so identical invocations produce byte-identical outputs.

Exit codes: 0 on success, 1 on user error (diagnostic on stderr), 2 on
internal error.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from dataclasses import asdict
from pathlib import Path

from . import classifiers, metrics, pipeline, plots, spectral
from .morphing import MorphSpec, morph
from .printscan import PnsParams, simulate_pns
from .raster import ImageIOError, load_image, save_image


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; route through our own
    # error handling so user errors consistently exit 1
    def error(self, message: str):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _add_pns_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--params", help="key=value parameter file")
    p.add_argument("--omega", type=float)
    p.add_argument("--beta-x", dest="beta_x", type=float)
    p.add_argument("--beta-k", dest="beta_k", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--k1", type=int)
    p.add_argument("--k2", type=int)
    p.add_argument("--sigma1", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--edge-noise", dest="edge_noise_std", type=float)
    p.add_argument("--dark-noise", dest="dark_noise_scale", type=float)
    p.add_argument("--jitter", type=float)


def _pns_params(args: argparse.Namespace, seed: int) -> PnsParams:
    if args.params:
        params = PnsParams.from_file(args.params)
    else:
        params = PnsParams()
    overrides = {"seed": seed}
    for name in (
        "omega", "beta_x", "beta_k", "gamma", "k1", "k2",
        "sigma1", "sigma2", "edge_noise_std", "dark_noise_scale", "jitter",
    ):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    merged = asdict(params)
    merged.update(overrides)
    return PnsParams(**merged)


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise _UsageError(f"expected WxH size, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="morphlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("morph", help="blend two landmarked face images")
    p.add_argument("--i0", required=True)
    p.add_argument("--i1", required=True)
    p.add_argument("--lm0", required=True)
    p.add_argument("--lm1", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--inner-only", action="store_true")

    p = sub.add_parser("pns", help="simulate the print-and-scan channel")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    _add_pns_flags(p)

    p = sub.add_parser("normalize", help="rescale and crop a face image")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--ann", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("augment", help="expand one normalized image")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--ann", required=True)
    p.add_argument("--scheme", choices=("au", "mc"), required=True)
    p.add_argument("--crop-size", default="224x224")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--manifest")
    p.add_argument("--label", choices=("genuine", "morphed"), default="genuine")

    p = sub.add_parser("build-set", help="build a balanced training set")
    p.add_argument("--genuine", required=True)
    p.add_argument("--morphed", required=True)
    p.add_argument("--scheme", choices=("au", "mc"), required=True)
    p.add_argument("--pns-config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--crop-size", default="224x224")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("spectrum", help="magnitude spectrum to CSV")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--log-display", action="store_true")
    p.add_argument("--plot")

    p = sub.add_parser("spectrum-compare", help="angle/correlation of two image spectra")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)

    p = sub.add_parser("train", help="train a classifier on feature CSV")
    p.add_argument("--kind", choices=("svm", "crc"), required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--lambda", dest="lam", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("score", help="score feature vectors with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--scores-out", required=True)

    p = sub.add_parser("fuse", help="average scores sharing a group key")
    p.add_argument("--scores", required=True)
    p.add_argument("--group-by", default="group_id")
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="summary metrics for a score set")
    p.add_argument("--scores", required=True)
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("det", help="DET curve CSV and figure")
    p.add_argument("--scores", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--plot", help="figure path (default: CSV path with .png)")
    p.add_argument("--no-plot", action="store_true")

    return parser


def _cmd_morph(args) -> int:
    i0 = load_image(args.i0)
    i1 = load_image(args.i1)
    p0 = pipeline.load_landmarks(args.lm0)
    p1 = pipeline.load_landmarks(args.lm1)
    spec = MorphSpec(alpha=args.alpha, composite_inner_only=args.inner_only)
    save_image(morph(i0, i1, p0, p1, spec), args.out)
    return 0


def _cmd_pns(args) -> int:
    params = _pns_params(args, args.seed)
    save_image(simulate_pns(load_image(args.inp), params), args.out)
    return 0


def _cmd_normalize(args) -> int:
    record = pipeline.load_annotation(args.ann)
    save_image(pipeline.normalize(load_image(args.inp), record.face), args.out)
    return 0


def _cmd_augment(args) -> int:
    img = load_image(args.inp)
    record = pipeline.load_annotation(args.ann)
    plan = (
        pipeline.AugmentationPlan.au()
        if args.scheme == "au"
        else pipeline.AugmentationPlan.mc(_parse_size(args.crop_size))
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.inp).stem
    rows = []
    for raster, desc in pipeline.augment(img, record.face, plan):
        rel = f"{stem}__{desc}.png"
        save_image(raster, out_dir / rel)
        rows.append(
            pipeline.ManifestRow(rel, args.label, record.source_ids or stem, record.alpha, desc, False, False)
        )
    if args.manifest:
        pipeline.write_manifest(rows, args.manifest)
    return 0


def _cmd_build_set(args) -> int:
    pns = None
    if args.pns_config:
        pns = PnsParams.from_file(args.pns_config)
    pipeline.build_training_set(
        args.genuine,
        args.morphed,
        args.scheme,
        args.out_dir,
        args.manifest,
        pns=pns,
        seed=args.seed,
        crop_size=_parse_size(args.crop_size),
        threads=args.threads,
    )
    return 0


def _cmd_spectrum(args) -> int:
    spec = spectral.magnitude_spectrum(load_image(args.inp))
    with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
        for row in spec.magnitudes:
            fh.write(",".join(f"{v:.6f}" for v in row) + "\n")
    if args.plot:
        plots.render_spectrum(spec, args.plot, log_display=args.log_display)
    return 0


def _cmd_spectrum_compare(args) -> int:
    sa = spectral.magnitude_spectrum(load_image(args.a))
    sb = spectral.magnitude_spectrum(load_image(args.b))
    print(f"angle={spectral.spectral_angle(sa, sb):.6f}")
    print(f"correlation={spectral.spectral_correlation(sa, sb):.6f}")
    return 0


def _cmd_train(args) -> int:
    fs = classifiers.FeatureSet.from_csv(args.features)
    if args.kind == "svm":
        model = classifiers.train_svm(fs, c=args.c, epochs=args.epochs, tol=args.tol, seed=args.seed)
    else:
        model = classifiers.train_crc(fs, lam=args.lam)
    classifiers.save_model(model, args.model_out)
    return 0


def _cmd_score(args) -> int:
    model = classifiers.load_model(args.model)
    fs = classifiers.FeatureSet.from_csv(args.features)
    rows = []
    for vector, label in zip(fs.vectors, fs.labels):
        _, score = classifiers.classify(model, vector)
        name = "bonafide" if label == classifiers.LABEL_GENUINE else "attack"
        rows.append(metrics.ScoreRow(name, score, ""))
    metrics.write_scores(rows, args.scores_out)
    return 0


def _cmd_fuse(args) -> int:
    if args.group_by != "group_id":
        raise ValueError(f"unknown group column {args.group_by!r} (scores carry group_id)")
    rows = metrics.read_scores(args.scores)
    metrics.write_scores(metrics.fuse_rows(rows), args.out)
    return 0


def _cmd_evaluate(args) -> int:
    ss = metrics.to_score_set(metrics.read_scores(args.scores))
    for key, value in metrics.summary(ss, threshold=args.threshold):
        print(f"{key}={value}")
    return 0


def _cmd_det(args) -> int:
    ss = metrics.to_score_set(metrics.read_scores(args.scores))
    curve = metrics.det_curve(ss)
    metrics.write_det_csv(curve, args.out_csv)
    if not args.no_plot:
        plot_path = args.plot or str(Path(args.out_csv).with_suffix(".png"))
        plots.render_det_curve(curve, plot_path)
    return 0


_HANDLERS = {
    "morph": _cmd_morph,
    "pns": _cmd_pns,
    "normalize": _cmd_normalize,
    "augment": _cmd_augment,
    "build-set": _cmd_build_set,
    "spectrum": _cmd_spectrum,
    "spectrum-compare": _cmd_spectrum_compare,
    "train": _cmd_train,
    "score": _cmd_score,
    "fuse": _cmd_fuse,
    "evaluate": _cmd_evaluate,
    "det": _cmd_det,
}


def dispatch(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        print(parser.format_usage(), file=sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    if args.command is None:
        print(parser.format_usage(), file=sys.stderr)
        return 1
    try:
        return _HANDLERS[args.command](args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ValueError, ImageIOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        print("internal error:", file=sys.stderr)
        traceback.print_exc()
        return 2


def entry() -> None:
    sys.exit(dispatch())
