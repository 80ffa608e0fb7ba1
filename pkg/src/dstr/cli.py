"""Command line interface: ``dstr <convert|synth|features|train|predict|evaluate>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .cad120 import Camera, ConversionError, convert_tree
from .model import ActivityLabel, DatasetError, load_dataset, save_dataset, video_from_record
from .pipeline import (
    ABLATIONS,
    ModelBundle,
    PipelineError,
    ablation,
    dump_features,
    evaluate_loso,
    load_config,
    predict,
    shuffle_labels,
    train_pipeline,
)
from .synth import ScriptError, benchmark_script, hands_up_script, synth_generate

BUILTIN_SCRIPTS = {"benchmark": benchmark_script, "hands-up": hands_up_script}


def _load_script(spec: str) -> dict:
    if spec in BUILTIN_SCRIPTS:
        return BUILTIN_SCRIPTS[spec]()
    try:
        return yaml.safe_load(Path(spec).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ScriptError(f"cannot read script {spec}: {exc}") from None


def _config(args):
    cfg = load_config(args.config)
    if getattr(args, "variant", None):
        cfg = ablation(cfg, args.variant)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _dataset(args):
    try:
        return load_dataset(args.dataset, args.format)
    except DatasetError as exc:
        raise PipelineError("load", str(exc)) from None


def cmd_convert(args) -> None:
    cam = Camera(args.fx, args.fy, args.cx, args.cy)
    paths = convert_tree(args.input, args.out, cam)
    print(f"wrote {len(paths)} videos to {args.out}")


def cmd_synth(args) -> None:
    ds = synth_generate(_load_script(args.spec), args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} videos to {args.out}")


def cmd_features(args) -> None:
    paths = dump_features(_config(args), _dataset(args), args.out)
    print(f"wrote {len(paths)} feature tables to {args.out}")


def cmd_train(args) -> None:
    bundle = train_pipeline(_config(args), _dataset(args))
    bundle.save(args.out)
    print(f"wrote bundle to {args.out}")


def cmd_predict(args) -> None:
    bundle = ModelBundle.load(args.bundle)
    try:
        record = json.loads(Path(args.video).read_text(encoding="utf-8"))
        video = video_from_record(record, _label_table(bundle, record), source=args.video)
    except (OSError, json.JSONDecodeError, DatasetError) as exc:
        raise PipelineError("load", str(exc)) from None
    p = predict(bundle, video)
    out = {
        "video_id": video.video_id,
        "label": p.label,
        "scores": dict(zip(bundle.labels, p.scores.tolist())),
        "words": p.words.tolist(),
    }
    print(json.dumps(out, indent=1))


def _label_table(bundle: ModelBundle, record: dict) -> dict[str, ActivityLabel]:
    table = {name: ActivityLabel(i, name) for i, name in enumerate(bundle.labels)}
    # the true label of a video under prediction may be unknown to the bundle
    name = str(record.get("label", ""))
    if name not in table:
        table[name] = ActivityLabel(-1, name)
    return table


def cmd_evaluate(args) -> None:
    cfg = _config(args)
    ds = _dataset(args)
    if args.shuffle_labels is not None:
        ds = shuffle_labels(ds, args.shuffle_labels)
    report = evaluate_loso(cfg, ds, args.repeats)
    text = report.dumps()
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
        Path(args.report).with_suffix(".txt").write_text(report.confusion_text(), encoding="utf-8")
    acc, prec, rec = report.accuracy, report.precision, report.recall
    print(f"accuracy {acc[0]:.3f} ± {acc[1]:.3f}  precision {prec[0]:.3f} ± {prec[1]:.3f}  recall {rec[0]:.3f} ± {rec[1]:.3f}")
    print(report.confusion_text(), end="")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dstr", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="CAD-120 style text files -> canonical JSON videos")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fx", type=float, default=Camera.fx)
    p.add_argument("--fy", type=float, default=Camera.fy)
    p.add_argument("--cx", type=float, default=Camera.cx)
    p.add_argument("--cy", type=float, default=Camera.cy)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("synth", help="generate a scripted synthetic dataset")
    p.add_argument("--spec", default="benchmark", help="script file (YAML/JSON) or one of: " + ", ".join(BUILTIN_SCRIPTS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    def common(p):
        p.add_argument("--config", help="YAML pipeline configuration")
        p.add_argument("--dataset", required=True)
        p.add_argument("--format", default="canonical", choices=["canonical", "cad120-converted"])
        p.add_argument("--variant", choices=sorted(ABLATIONS), help="ablation variant applied on top of the config")

    p = sub.add_parser("features", help="dump per-window feature tables")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train a model bundle")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify one canonical video file")
    p.add_argument("--bundle", required=True)
    p.add_argument("--video", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="leave-one-subject-out evaluation")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--report", help="JSON report path; the confusion matrix goes next to it as .txt")
    p.add_argument("--shuffle-labels", type=int, metavar="SEED", help="permute labels within subjects (chance control)")
    p.set_defaults(func=cmd_evaluate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except PipelineError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1
    except ConversionError as exc:
        print(f"error [convert] {exc}", file=sys.stderr)
        return 1
    except ScriptError as exc:
        print(f"error [synth] {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
