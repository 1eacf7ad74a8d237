"""``snowlens`` command line: every pipeline stage as a subcommand.

Settings resolve as built-in default < preset < JSON config file <
``SNOWLENS_*`` environment variable < command-line flag, and the resolved
settings are written to ``<out>/run_config.json`` before any work starts.
"""
import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path


from . import __version__
from .core import overlay
from .exceptions import NoRoadError, SnowlensError
from .ingest import (
    IMAGE_SUFFIXES,
    SplitSpec,
    annotated_files,
    build_manifest,
    index_dir,
    load_annotated_dataset,
    load_paired_dataset,
    match_ids,
    paired_files,
    prepare_segmentation_crops,
    read_image,
    split,
    write_image,
    write_json,
)
from .maskio import read_label_mask, write_label_mask

log = logging.getLogger("snowlens")

PRESETS = {
    "desk": {
        "translator": {"input_size": (128, 192), "depth": 6, "base_channels": 16, "epochs": 10,
                       "dropout": 0.0},
        "segmenter": {"input_size": (96, 96), "width_mult": 0.35, "aspp_channels": 64,
                      "low_level_channels": 24, "decoder_channels": 64, "epochs": 10,
                      "batch_size": 16, "learning_rate": 1e-3},
        "grid": (2, 4),
    },
    "paper": {
        "translator": {"input_size": (512, 768), "depth": 8, "base_channels": 64, "epochs": 200,
                       "dropout": 0.5},
        "segmenter": {"input_size": (299, 299), "width_mult": 1.0, "aspp_channels": 256,
                      "low_level_channels": 48, "decoder_channels": 256, "epochs": 30,
                      "batch_size": 16, "learning_rate": 1e-3},
        "grid": (2, 4),
    },
}


def _size(text):
    parts = str(text).lower().replace("x", ",").split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}")
    return int(parts[0]), int(parts[1])


def _flag(text):
    if isinstance(text, bool):
        return text
    return str(text).lower() in ("1", "true", "yes", "on")


COMMON = [
    ("config", str, None, "JSON config file"),
    ("seed", int, 0, "random seed"),
    ("out", str, None, "output directory"),
    ("preset", str, "desk", "model scale preset: desk or paper"),
]

COMMANDS = {
    "synth": ("generate a synthetic paired/annotated dataset", [
        ("n", int, 64, "number of scenes"),
        ("canvas", _size, (128, 192), "scene size HxW"),
        ("noise_sigma", float, 6.0, "night noise standard deviation"),
        ("night_gain", float, 0.3, "night brightness gain"),
    ]),
    "ingest": ("validate a dataset tree and write a hashed manifest", [
        ("data", str, None, "dataset root"),
        ("layout", str, "paired", "paired or annotated"),
        ("fraction", float, None, "train fraction (adds split tags)"),
    ]),
    "split": ("seeded train/test split of a dataset's sample ids", [
        ("data", str, None, "dataset root"),
        ("layout", str, "paired", "paired or annotated"),
        ("fraction", float, 0.9, "train fraction"),
    ]),
    "train-translate": ("train a paired translator (role U: night->day, T: snowy->clear)", [
        ("data", str, None, "paired dataset root"),
        ("role", str, "U", "U or T"),
        ("condition_dir", str, None, "condition subdirectory (default night for U, day for T)"),
        ("target_dir", str, None, "target subdirectory (default day for U, clear for T)"),
        ("split_file", str, None, "split.json restricting training to its train ids"),
        ("epochs", int, None, "override preset epochs"),
        ("l1_weight", float, 100.0, "L1 weight"),
        ("learning_rate", float, 2e-4, "Adam learning rate"),
        ("gan_mode", str, "bce", "bce or lsgan"),
        ("checkpoint_every", int, 0, "checkpoint period in epochs (0: end only)"),
        ("resume", str, None, "checkpoint to resume from"),
    ]),
    "train-segment": ("train the six-class segmenter on grid crops", [
        ("data", str, None, "annotated dataset root"),
        ("split_file", str, None, "split.json restricting training to its train ids"),
        ("epochs", int, None, "override preset epochs"),
        ("batch_size", int, None, "override preset batch size"),
        ("learning_rate", float, None, "override preset learning rate"),
        ("class_weighting", str, "none", "none or frequency"),
        ("checkpoint_every", int, 0, "checkpoint period in epochs (0: end only)"),
        ("resume", str, None, "checkpoint to resume from"),
        ("backbone_weights", str, None, "external backbone state dict"),
    ]),
    "translate": ("translate images with a trained translator", [
        ("model", str, None, "translator checkpoint (.pt)"),
        ("input", str, None, "image file or directory"),
        ("restore_size", _flag, False, "resize outputs back to the input size"),
    ]),
    "segment": ("predict label masks with a trained segmenter", [
        ("model", str, None, "segmenter checkpoint (.pt)"),
        ("input", str, None, "image file or directory"),
        ("overlay", _flag, False, "also write color overlays"),
    ]),
    "eval-seg": ("confusion-matrix metrics between predicted and ground-truth masks", [
        ("pred", str, None, "predicted mask directory"),
        ("gt", str, None, "ground-truth mask directory"),
        ("model", str, None, "segmenter checkpoint; predicts --data images instead of --pred"),
        ("data", str, None, "annotated dataset root used with --model"),
        ("average", str, "macro", "macro or micro F1"),
    ]),
    "eval-dice": ("ROI Dice between real-day and fake-day label masks", [
        ("real_labels", str, None, "DrL mask directory"),
        ("fake_labels", str, None, "DfL mask directory"),
        ("roi", str, "snow", "comma separated ROI classes"),
    ]),
    "hazard": ("snow hazard index of a day frame (translator T + segmenter S)", [
        ("image", str, None, "frame file or directory"),
        ("t", str, None, "road-surface translator checkpoint"),
        ("s", str, None, "segmenter checkpoint"),
    ]),
    "hazard-night": ("snow hazard index of a night frame via U, T and S", [
        ("image", str, None, "night frame file or directory"),
        ("u", str, None, "night-to-day translator checkpoint"),
        ("t", str, None, "road-surface translator checkpoint"),
        ("s", str, None, "segmenter checkpoint"),
    ]),
    "report": ("montage of a directory of images, or a Dice bar plot", [
        ("images", str, None, "image directory for a montage"),
        ("grid", _size, (4, 4), "montage grid RxC"),
        ("dice_json", str, None, "dice.json from eval-dice for a bar plot"),
        ("roi", str, "snow", "class plotted from --dice-json"),
    ]),
}

REQUIRED = {
    "synth": ["out"], "ingest": ["data", "out"], "split": ["data", "out"],
    "train-translate": ["data", "out"], "train-segment": ["data", "out"],
    "translate": ["model", "input", "out"], "segment": ["model", "input", "out"],
    "eval-seg": ["gt", "out"], "eval-dice": ["real_labels", "fake_labels", "out"],
    "hazard": ["image", "t", "s", "out"], "hazard-night": ["image", "u", "t", "s", "out"],
    "report": ["out"],
}


class UsageError(Exception):
    pass


def build_parser():
    parser = argparse.ArgumentParser(prog="snowlens", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"snowlens {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name, (help_text, options) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        for opt, typ, default, text in COMMON + options:
            p.add_argument("--" + opt.replace("_", "-"), dest=opt, type=typ, default=None,
                           help=f"{text} (default: {default})")
    return parser


def resolve_config(command, args, environ=None):
    """Merge defaults < preset < config file < environment < flags."""
    environ = os.environ if environ is None else environ
    options = COMMON + COMMANDS[command][1]
    types = {name: typ for name, typ, _, _ in options}
    resolved = {name: default for name, _, default, _ in options}
    config_path = args.get("config") or environ.get("SNOWLENS_CONFIG")
    file_values = {}
    if config_path:
        with open(config_path) as f:
            raw = json.load(f)
        file_values = {k: v for k, v in raw.items() if not isinstance(v, dict)}
        file_values.update(raw.get(command, {}))
    for name in resolved:
        if name in file_values:
            resolved[name] = _coerce(types[name], file_values[name])
        env = environ.get("SNOWLENS_" + name.upper())
        if env is not None:
            resolved[name] = _coerce(types[name], env)
        if args.get(name) is not None:
            resolved[name] = args[name]
    if resolved["preset"] not in PRESETS:
        raise UsageError(f"unknown preset {resolved['preset']!r}; choose from {sorted(PRESETS)}")
    missing = [n for n in REQUIRED[command] if resolved.get(n) in (None, "")]
    if missing:
        raise UsageError(f"{command}: missing required option(s): "
                         + ", ".join("--" + m.replace("_", "-") for m in missing))
    resolved["command"] = command
    return resolved


def _coerce(typ, value):
    if typ is _size and isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    return typ(value) if isinstance(value, str) or typ in (int, float) else value


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _snapshot(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "run_config.json", _jsonable(cfg))
    return out


def _progress(prefix):
    def report(row):
        fields = " ".join(f"{k}={v:.5g}" for k, v in row.items() if k != "epoch")
        print(f"[{prefix}] epoch {row['epoch']} {fields}", file=sys.stderr, flush=True)
    return report


def _images_in(path):
    path = Path(path)
    if path.is_file():
        return [(path.stem, path)]
    if not path.is_dir():
        raise SnowlensError(f"no such file or directory: {path}")
    return [(p.stem, p) for p in sorted(path.iterdir()) if p.suffix.lower() in IMAGE_SUFFIXES]


def _masks_in(directory):
    return {p.stem: p for p in sorted(Path(directory).glob("*.png"))}


def _train_ids(split_file):
    if not split_file:
        return None
    with open(split_file) as f:
        return set(json.load(f)["train"])


# -- commands ---------------------------------------------------------------

def cmd_synth(cfg):
    from .synth import SceneParams, generate_dataset

    out = _snapshot(cfg)
    base = SceneParams(canvas=tuple(cfg["canvas"]), noise_sigma=cfg["noise_sigma"],
                       night_gain=cfg["night_gain"])
    manifest = generate_dataset(cfg["n"], out, base, seed=cfg["seed"])
    print(f"wrote {manifest['n']} scenes to {out}")


def cmd_ingest(cfg):

    out = _snapshot(cfg)
    loader = load_paired_dataset if cfg["layout"] == "paired" else load_annotated_dataset
    samples = loader(cfg["data"])
    spec = SplitSpec(cfg["fraction"], cfg["seed"]) if cfg["fraction"] else None
    manifest = build_manifest(cfg["data"], cfg["layout"], spec)
    manifest["root"] = str(cfg["data"])
    write_json(out / "manifest.json", manifest)
    print(f"{len(samples)} samples validated; manifest at {out / 'manifest.json'}")


def cmd_split(cfg):

    out = _snapshot(cfg)
    listing = paired_files(cfg["data"]) if cfg["layout"] == "paired" else annotated_files(cfg["data"])
    ids = [row[0] for row in listing]
    train, test = split(ids, SplitSpec(cfg["fraction"], cfg["seed"]))
    write_json(out / "split.json", {"seed": cfg["seed"], "train_fraction": cfg["fraction"],
                                    "n_train": len(train), "n_test": len(test),
                                    "train": train, "test": test})
    print(f"train {len(train)} / test {len(test)}")


def _write_curve_csv(path, curve, columns):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in curve:
            writer.writerow([row[c] if c == "epoch" else repr(float(row[c])) for c in columns])


def cmd_train_translate(cfg):
    from .checkpoint import Checkpoint
    from .translator import Pix2PixTranslator

    role = cfg["role"]
    if role not in ("U", "T"):
        raise UsageError("--role must be U or T")
    defaults = {"U": ("night", "day"), "T": ("day", "clear")}[role]
    cond_dir = cfg["condition_dir"] or defaults[0]
    target_dir = cfg["target_dir"] or defaults[1]
    out = _snapshot(cfg)
    root = Path(cfg["data"])

    conds = index_dir(root / cond_dir, IMAGE_SUFFIXES)
    targets = index_dir(root / target_dir, IMAGE_SUFFIXES)
    ids = match_ids(conds, targets)
    keep = _train_ids(cfg["split_file"])
    if keep is not None:
        ids = [i for i in ids if i in keep]
    params = dict(PRESETS[cfg["preset"]]["translator"])
    if cfg["epochs"] is not None:
        params["epochs"] = cfg["epochs"]
    est = Pix2PixTranslator(**params, l1_weight=cfg["l1_weight"],
                            learning_rate=cfg["learning_rate"], gan_mode=cfg["gan_mode"],
                            seed=cfg["seed"], role_tag=role,
                            checkpoint_every=cfg["checkpoint_every"],
                            checkpoint_dir=str(out / "checkpoints"))
    resume = Checkpoint.load(cfg["resume"]) if cfg["resume"] else None
    est.fit([read_image(conds[i]) for i in ids], [read_image(targets[i]) for i in ids],
            resume_from=resume, progress=_progress(f"translator {role}"))
    est.save(out / f"translator_{role}.pt")
    _write_curve_csv(out / "loss_log.csv", est.loss_curve_,
                     ["epoch", "adversarial_g", "adversarial_d", "l1", "total_g"])
    print(f"trained translator {role} on {len(ids)} pairs -> {out / f'translator_{role}.pt'}")


def cmd_train_segment(cfg):
    from .checkpoint import Checkpoint
    from .segmenter import DeepLabSegmenter

    out = _snapshot(cfg)
    preset = PRESETS[cfg["preset"]]
    params = dict(preset["segmenter"])
    for key in ("epochs", "batch_size", "learning_rate"):
        if cfg[key] is not None:
            params[key] = cfg[key]
    samples = load_annotated_dataset(cfg["data"])
    keep = _train_ids(cfg["split_file"])
    if keep is not None:
        samples = [s for s in samples if s.id in keep]
    rows, cols = preset["grid"]
    size = params["input_size"][0]
    crops = prepare_segmentation_crops(samples, rows, cols, size)
    est = DeepLabSegmenter(**params, seed=cfg["seed"], class_weighting=cfg["class_weighting"],
                           checkpoint_every=cfg["checkpoint_every"], grid=(rows, cols),
                           checkpoint_dir=str(out / "checkpoints"),
                           backbone_weights=cfg["backbone_weights"])
    resume = Checkpoint.load(cfg["resume"]) if cfg["resume"] else None
    est.fit([c.image for c in crops], [c.label for c in crops], resume_from=resume,
            progress=_progress("segmenter"))
    est.save(out / "segmenter.pt")
    _write_curve_csv(out / "train_metrics.csv", est.loss_curve_, ["epoch", "loss", "miou_train"])
    print(f"trained segmenter on {len(crops)} crops -> {out / 'segmenter.pt'}")


def _load_translator(path):
    from .translator import Pix2PixTranslator

    return Pix2PixTranslator.load(path)


def _load_segmenter(path, preset="desk"):
    from .segmenter import DeepLabSegmenter

    return DeepLabSegmenter.load(path, grid=PRESETS[preset]["grid"])


def cmd_translate(cfg):
    out = _snapshot(cfg)
    model = _load_translator(cfg["model"])
    for sid, path in _images_in(cfg["input"]):
        write_image(out / f"{sid}.png", model.translate(read_image(path), cfg["restore_size"]))


def cmd_segment(cfg):
    out = _snapshot(cfg)
    model = _load_segmenter(cfg["model"], cfg["preset"])
    for sid, path in _images_in(cfg["input"]):
        image = read_image(path)
        label = model.segment(image)
        write_label_mask(out / f"{sid}.png", label)
        if cfg["overlay"]:
            (out / "overlay").mkdir(exist_ok=True)
            write_image(out / "overlay" / f"{sid}.png", overlay(image, label, 0.5))


def cmd_eval_seg(cfg):
    from .metrics import confusion_accumulate, ConfusionMatrix, summarize
    from .core import CLASS_NAMES

    out = _snapshot(cfg)
    gt = _masks_in(cfg["gt"])
    cm = ConfusionMatrix()
    if cfg["model"]:
        if not cfg["data"]:
            raise UsageError("--model requires --data")
        model = _load_segmenter(cfg["model"], cfg["preset"])
        for s in load_annotated_dataset(cfg["data"]):
            if s.id in gt:
                cm = confusion_accumulate(cm, model.segment(s.image), read_label_mask(gt[s.id]))
    else:
        if not cfg["pred"]:
            raise UsageError("eval-seg needs --pred or --model/--data")
        pred = _masks_in(cfg["pred"])

        for sid in match_ids(pred, gt):
            cm = confusion_accumulate(cm, read_label_mask(pred[sid]), read_label_mask(gt[sid]))
    report = summarize(cm, cfg["average"]).to_dict()
    report["confusion"] = cm.counts.tolist()
    write_json(out / "seg_report.json", report)
    with open(out / "per_class.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["class", "iou", "accuracy", "f1"])
        for i, name in enumerate(CLASS_NAMES):
            writer.writerow([name] + [("" if report[k][i] is None else repr(report[k][i]))
                                      for k in ("per_class_iou", "per_class_accuracy", "per_class_f1")])
    print(f"mIoU {report['mean_iou']:.4f}  mean acc {report['mean_accuracy']:.4f}  "
          f"mean F1 {report['mean_f1']:.4f}")


def cmd_eval_dice(cfg):
    from .metrics import dice_batch, parse_roi
    from .plots import emit_dice_barplot

    out = _snapshot(cfg)
    real, fake = _masks_in(cfg["real_labels"]), _masks_in(cfg["fake_labels"])
    ids = match_ids(real, fake)
    roi = parse_roi(cfg["roi"])
    batch = dice_batch([read_label_mask(real[i]) for i in ids],
                       [read_label_mask(fake[i]) for i in ids], roi, ids)
    (out / "dice.json").write_text(batch.to_json())
    (out / "dice.csv").write_text(batch.to_csv())
    emit_dice_barplot(batch, out / "dice.png", roi[0])
    for name, s in batch.summary().items():
        print(f"{name}: median Dice {s['median']:.4f} over {len(ids)} images ({s['flagged']} flagged)")


def _hazard_common(cfg, night):
    out = _snapshot(cfg)
    from .hazard import day_hazard_pipeline, night_hazard_pipeline

    t = _load_translator(cfg["t"])
    s = _load_segmenter(cfg["s"], cfg["preset"])
    u = _load_translator(cfg["u"]) if night else None
    frames = _images_in(cfg["image"])
    single = Path(cfg["image"]).is_file()
    results, failed = [], False
    for sid, path in frames:
        frame_out = out if single else out / sid
        image = read_image(path)
        try:
            if night:
                rep = night_hazard_pipeline(image, u, t, s, out_dir=frame_out)
            else:
                rep = day_hazard_pipeline(image, t, s, out_dir=frame_out)
            doc = rep.to_dict()
            line = f"{sid}: snow hazard index {doc['index_display']}"
        except NoRoadError as exc:
            failed = True
            doc = {"verdict": "no-road", "message": str(exc),
                   "source_tag": "night-composed" if night else "day-direct",
                   "artifacts": {"RsL": str(frame_out / "RsL.png")}}
            line = f"{sid}: no-road"
        doc["image"] = str(path)
        results.append(doc)
        write_json(frame_out / "hazard.json", doc)
        print(line)
    if not single:
        write_json(out / "hazard_batch.json", {"frames": results})
    return 1 if failed else 0


def cmd_hazard(cfg):
    return _hazard_common(cfg, night=False)


def cmd_hazard_night(cfg):
    return _hazard_common(cfg, night=True)


def cmd_report(cfg):
    from .plots import emit_dice_barplot, emit_montage

    out = _snapshot(cfg)
    did = False
    if cfg["images"]:
        rows, cols = cfg["grid"]
        frames = _images_in(cfg["images"])[: rows * cols]
        write_image(out / "montage.png", emit_montage([read_image(p) for _, p in frames], (rows, cols)))
        did = True
    if cfg["dice_json"]:
        from .metrics import DiceBatch, DiceReport, parse_roi
        from .core import parse_class

        with open(cfg["dice_json"]) as f:
            doc = json.load(f)
        reports = []
        for e in doc["images"]:
            roi = tuple(parse_class(c) for c in e["roi"])
            reports.append(DiceReport(e["image_id"], roi,
                                      {parse_class(k): v for k, v in e["dice"].items()},
                                      {parse_class(k): v for k, v in e["empty"].items()}))
        emit_dice_barplot(DiceBatch(reports), out / "dice.png", parse_roi(cfg["roi"])[0])
        did = True
    if not did:
        raise UsageError("report needs --images and/or --dice-json")


HANDLERS = {
    "synth": cmd_synth, "ingest": cmd_ingest, "split": cmd_split,
    "train-translate": cmd_train_translate, "train-segment": cmd_train_segment,
    "translate": cmd_translate, "segment": cmd_segment, "eval-seg": cmd_eval_seg,
    "eval-dice": cmd_eval_dice, "hazard": cmd_hazard, "hazard-night": cmd_hazard_night,
    "report": cmd_report,
}


def run(argv=None, environ=None):
    """Run one command; returns the exit status (0 ok, 1 domain error, 2 usage error)."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(ns.command, vars(ns), environ)
        status = HANDLERS[ns.command](cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"snowlens: error: {exc}", file=sys.stderr)
        return 2
    except (SnowlensError, ValueError, OSError) as exc:
        print(f"snowlens: {exc}", file=sys.stderr)
        return 1
    return int(status or 0)


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
