"""Command-line entry point: ``granular-id <command> ...``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import container, dataio, evaluation, synth
from .classify import ecoc_train
from .features import SPACE_IDS, FeatureSpaceSpec, fit_extractor
from .signal import N_SAMPLES, Dataset, fit_to_length


def _load_data(path: str) -> Dataset:
    p = Path(path)
    if p.is_file() and container.is_container(p):
        return container.load_dataset(p)
    if p.is_dir() or p.is_file():
        return dataio.ingest(p)
    raise FileNotFoundError(f"no dataset at {path}")


def _spec(space: str, args) -> FeatureSpaceSpec:
    return FeatureSpaceSpec(space, pca_k=args.pca_k, rica_k=args.rica_k, zero_phase=args.zero_phase, seed=args.seed)


def cmd_ingest(args) -> None:
    manifest = dataio.parse_manifest(args.manifest)
    if args.trim:
        manifest = replace(manifest, trim=args.trim)
    ds = dataio.ingest(manifest)
    container.save_dataset(ds, args.out)
    for name, n in ds.class_counts().items():
        print(f"{name}: {n}")
    print(f"{len(ds)} samples, {len(ds.classes)} classes -> {args.out}")


def cmd_train(args) -> None:
    ds = _load_data(args.data)
    spec = _spec(args.space, args)
    ext = fit_extractor(spec, ds.samples)
    Z = ext.transform(ds.signal_array())
    model = ecoc_train(Z, ds.label_indices(), ds.classes, args.c, seed=args.seed, extractor=ext)
    container.save_model(model, args.out)
    print(f"trained {model.coding.L} learners on {len(ds)} samples ({spec.id}, dim {ext.out_dim}) -> {args.out}")


def cmd_predict(args) -> None:
    model = container.load_model(args.model)
    columns = dict(dataio.DEFAULT_COLUMNS)
    if args.manifest:
        columns = dataio.parse_manifest(args.manifest).columns
    sig = fit_to_length(dataio.read_recording_csv(args.input, columns), N_SAMPLES, args.trim)
    losses = model.losses(model.extractor.transform(sig.data[None]))[0]
    print(model.classes[int(np.argmin(losses))])
    for name, loss in zip(model.classes, losses):
        print(f"  {name}\t{loss:.6f}")


def _plan(ds: Dataset, args) -> evaluation.SplitPlan:
    return evaluation.make_split_plan(ds, args.repeats, args.train, args.test, args.seed)


def _print_report(r: evaluation.EvalReport) -> None:
    print(f"{r.space_id}\t{r.mean:.4f} (+/- {r.sd:.4f})")


def cmd_evaluate(args) -> None:
    ds = _load_data(args.data)
    report = evaluation.run_experiment(ds, _spec(args.space, args), _plan(ds, args), args.c, args.seed)
    _print_report(report)
    if args.report:
        evaluation.write_report_csv([report], args.report)
    if args.confusion:
        evaluation.write_confusion_csv(report, args.confusion)


def cmd_compare(args) -> None:
    ds = _load_data(args.data)
    spaces = SPACE_IDS if args.spaces == "all" else tuple(s.strip() for s in args.spaces.split(",") if s.strip())
    specs = [_spec(s, args) for s in spaces]
    result = evaluation.compare_spaces(ds, specs, _plan(ds, args), args.c, args.seed, progress=_print_report)
    if args.out:
        evaluation.write_report_csv(result.reports, args.out)
    if args.pvals:
        evaluation.write_pvalues_csv(result, args.pvals)
    if args.confusion_dir:
        out = Path(args.confusion_dir)
        out.mkdir(parents=True, exist_ok=True)
        for r in result.reports:
            evaluation.write_confusion_csv(r, out / f"confusion_{r.space_id}.csv")
    print("ranking: " + " > ".join(result.ranking()))


def cmd_ablate(args) -> None:
    ds = _load_data(args.data)
    report = evaluation.permuted_signal_ablation(ds, _plan(ds, args), args.c, args.seed, args.space)
    _print_report(report)
    print(f"chance level\t{report.chance_level:.4f}")
    if args.report:
        evaluation.write_report_csv([report], args.report)


def cmd_synth(args) -> None:
    ds = synth.generate_dataset(args.classes, args.per_class, args.separation, args.seed)
    manifest = dataio.write_dataset(ds, args.out)
    print(f"{len(ds)} recordings, {len(ds.classes)} classes -> {manifest}")


def cmd_inspect(args) -> None:
    meta, _ = container.read_container(args.model, "model")
    model = container.load_model(args.model)
    ext = model.extractor
    print(f"format version: {container.FORMAT_VERSION}")
    print(f"feature space: {ext.spec.id}")
    print(f"base dim: {ext.in_dim}  feature dim: {ext.out_dim}  learners: {model.coding.L}")
    print(f"C: {meta['C'][0]!r}")
    print("classes:")
    for i, c in enumerate(model.classes):
        print(f"  {i}: {c}")
    print("coding matrix:")
    for i, row in enumerate(model.coding.M):
        print(f"  {i:>2} " + " ".join(f"{int(v):+d}" if v else " 0" for v in row))


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset container or manifest / dataset directory")
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--train", type=int, default=50, help="training samples per class")
    p.add_argument("--test", type=int, default=12, help="test samples per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c", type=float, default=1.0, help="SVM soft-margin penalty")
    _add_space_flags(p)


def _add_space_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--zero-phase", action="store_true", help="forward-backward high-pass filtering")
    p.add_argument("--pca-k", type=int, default=100, help="components kept by the pca spaces")
    p.add_argument("--rica-k", type=int, default=80, help="features learned by pca_rica")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="granular-id", description="Granular material identification from F/T recordings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a CSV dataset into a binary container")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trim", choices=("end", "head"), help="override the manifest trim policy")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a model on a whole dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--space", default="raw_plus_hfmh", choices=SPACE_IDS)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    _add_space_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify one recording")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--manifest", help="take the column mapping from this manifest")
    p.add_argument("--trim", choices=("end", "head"), default="end")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="repeated random-split evaluation of one feature space")
    _add_eval_flags(p)
    p.add_argument("--space", default="raw_plus_hfmh", choices=SPACE_IDS)
    p.add_argument("--report")
    p.add_argument("--confusion")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="evaluate several feature spaces on the same splits")
    _add_eval_flags(p)
    p.add_argument("--spaces", default="all", help="'all' or a comma-separated list")
    p.add_argument("--out")
    p.add_argument("--pvals")
    p.add_argument("--confusion-dir")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ablate-permute", help="evaluate on time-permuted recordings")
    _add_eval_flags(p)
    p.add_argument("--space", default="raw", choices=SPACE_IDS)
    p.add_argument("--report")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="write a synthetic dataset as CSV files")
    p.add_argument("--classes", type=int, default=11)
    p.add_argument("--per-class", type=int, default=62)
    p.add_argument("--separation", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("inspect", help="describe a model file")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "spaces", None) not in (None, "all"):
            unknown = [s for s in args.spaces.split(",") if s.strip() and s.strip() not in SPACE_IDS]
            if unknown:
                raise ValueError(f"unregistered feature space(s): {', '.join(unknown)}")
        args.func(args)
    except (ValueError, OSError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
