"""Command line entry points: training, evaluation, inference, data tools.

Configuration can come from a YAML file (--config) whose sections match
the config dataclasses (model, train, loss_weights, dataset); command
line flags win over file values. The resolved configuration is written
into the output directory so any run can be reproduced from it.

Exit codes: 0 success, 2 configuration error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import imaging
from .data import DatasetConfig, InpaintingDataset, write_synth_dataset
from .imaging import MaskGenerationError, MaskSynthConfig
from .losses import LossWeights
from .models import ModelConfig
from .training import CheckpointError, TrainConfig, Trainer, TrainingDivergedError

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    pass


def _load_yaml(path):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} does not exist")
    loaded = yaml.safe_load(p.read_text())
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ConfigError(f"config file {p} must hold a mapping at top level")
    return loaded


def _section(file_cfg, name, cls, overrides):
    """Merge one YAML section with CLI overrides into a config dataclass."""
    raw = dict(file_cfg.get(name) or {})
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {', '.join(unknown)}")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if cls is DatasetConfig:
        if isinstance(raw.get("mask_synth"), dict):
            raw["mask_synth"] = MaskSynthConfig(**raw["mask_synth"])
        if "split_fractions" in raw:
            raw["split_fractions"] = tuple(raw["split_fractions"])
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad section {name!r}: {exc}") from exc


def _write_resolved_config(trainer, out_dir):
    resolved = {
        "model": dataclasses.asdict(trainer.model_config),
        "train": dataclasses.asdict(trainer.train_config),
        "loss_weights": dataclasses.asdict(trainer.loss_weights),
        "dataset": dataclasses.asdict(trainer.dataset.config),
    }
    (Path(out_dir) / "config.yaml").write_text(yaml.safe_dump(resolved, sort_keys=False))


def _require_file(path, what):
    if path is not None and not Path(path).is_file():
        raise ConfigError(f"{what} {path} does not exist")
    return path


# ----------------------------------------------------------------------
# commands

def cmd_train(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.resume:
        _require_file(args.resume, "checkpoint")
        trainer = Trainer.restore(args.resume, out_dir=out)
    else:
        file_cfg = _load_yaml(args.config) if args.config else {}
        model_cfg = _section(file_cfg, "model", ModelConfig, {
            "base_width": args.base_width,
            "disc_width": args.disc_width,
            "extractor_width": args.extractor_width,
            "use_edge": False if args.no_edge else None,
            "use_label": False if args.no_label else None,
        })
        train_cfg = _section(file_cfg, "train", TrainConfig, {
            "seed": args.seed,
            "batch_size": args.batch,
            "num_iterations": args.iters,
            "eval_every": args.eval_every,
            "checkpoint_every": args.checkpoint_every,
            "device": args.device,
        })
        weights = _section(file_cfg, "loss_weights", LossWeights, {})
        dataset_cfg = _section(file_cfg, "dataset", DatasetConfig, {
            "root": args.data,
            "synthetic_samples": args.synthetic,
            "image_size": args.size,
            "seed": args.seed,
        })
        dataset_cfg.validate()
        dataset = InpaintingDataset(dataset_cfg)
        trainer = Trainer(dataset, model_cfg, train_cfg, weights, out_dir=out)
    _write_resolved_config(trainer, out)
    trainer.run(args.iters)
    log.info("finished at iteration %d; checkpoint in %s", trainer.iteration, out)
    return EXIT_OK


def _override_dataset(trainer, data, synthetic):
    if data is None and synthetic is None:
        return
    cfg = dataclasses.replace(
        trainer.dataset.config,
        root=data,
        synthetic_samples=0 if data is not None else int(synthetic),
    )
    trainer.dataset = InpaintingDataset(cfg)


def cmd_evaluate(args):
    _require_file(args.checkpoint, "checkpoint")
    trainer = Trainer.restore(args.checkpoint)
    _override_dataset(trainer, args.data, args.synthetic)
    scores = trainer.evaluate(args.split, max_samples=args.max_samples)
    if args.region == "holes":
        keys = [k for k in scores if k.endswith("_holes") or k.endswith("_ssim")]
    else:
        keys = [k for k in scores if not k.endswith("_holes")]
    for k in keys:
        print(f"{k} {scores[k]:.6g}")
    if args.out:
        Path(args.out).write_text(json.dumps(scores, indent=2) + "\n")
    return EXIT_OK


def _read_gray(path):
    img = imaging.read_png(path)
    return img[:, :, 0] if img.ndim == 3 else img


def cmd_inpaint(args):
    _require_file(args.checkpoint, "checkpoint")
    for p, what in ((args.rgb, "rgb image"), (args.depth, "depth image"),
                    (args.mask, "mask image")):
        _require_file(p, what)
    trainer = Trainer.restore(args.checkpoint)
    num_classes = trainer.dataset.config.num_classes

    rgb = imaging.read_png(args.rgb)
    if rgb.ndim == 2:
        rgb = np.repeat(rgb[:, :, None], 3, axis=2)
    depth = _read_gray(args.depth)
    mask = (_read_gray(args.mask) > 0.5).astype(np.float32)
    if rgb.shape[:2] != depth.shape or rgb.shape[:2] != mask.shape:
        raise ConfigError("rgb, depth, and mask sizes do not match")
    if args.edge:
        _require_file(args.edge, "edge image")
        edge = (_read_gray(args.edge) > 0.5).astype(np.float32)
    else:
        edge = imaging.canny_edges(imaging.rgb_to_gray(rgb))
        log.warning("no edge map given; derived one from the RGB input")
    if args.label:
        _require_file(args.label, "label image")
        label_map = imaging.read_label_png(args.label)
        label = imaging.encode_label(label_map, num_classes)
    else:
        label = np.zeros(rgb.shape[:2], dtype=np.float32)
        log.warning("no label map given; using all-background labels")

    size = trainer.dataset.config.image_size
    h, w = rgb.shape[:2]
    from .data import SampleBundle

    bundle = SampleBundle.from_truths(
        imaging.resize(rgb, size, size),
        imaging.resize(depth, size, size),
        imaging.resize_nearest(edge, size, size),
        imaging.resize_nearest(label, size, size),
        imaging.resize_nearest(mask, size, size),
    )
    result = trainer.infer(bundle)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    originals = {"rgb": rgb, "depth": depth, "edge": edge, "label": label}
    for plane, original in originals.items():
        raw_key = f"raw_{plane}"
        if raw_key not in result:
            continue
        raw_full = imaging.resize(result[raw_key], h, w)
        imaging.write_png(out / f"raw_{plane}.png", raw_full)
        imaging.write_png(out / f"inpainted_{plane}.png",
                          imaging.composite(raw_full, original, mask))
    log.info("wrote inpainting results to %s", out)
    return EXIT_OK


def cmd_make_masks(args):
    cfg = MaskSynthConfig(target_coverage_range=(args.min_coverage, args.max_coverage))
    cfg.validate()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        mask = imaging.synth_mask(cfg.with_seed(args.seed + i), args.size, args.size)
        imaging.write_png(out / f"mask_{i:05d}.png", mask)
    log.info("wrote %d masks to %s", args.count, out)
    return EXIT_OK


def cmd_make_edges(args):
    _require_file(args.image, "input image")
    img = imaging.read_png(args.image)
    gray = imaging.rgb_to_gray(img) if img.ndim == 3 else img
    edges = imaging.canny_edges(gray, args.low, args.high)
    out = Path(args.out) if args.out else Path(args.image).with_name(
        Path(args.image).stem + "_edges.png"
    )
    imaging.write_png(out, edges)
    log.info("wrote edge map to %s", out)
    return EXIT_OK


def cmd_synth_dataset(args):
    write_synth_dataset(args.out, args.count, args.seed, args.size, args.classes)
    log.info("wrote %d synthetic samples to %s", args.count, args.out)
    return EXIT_OK


# ----------------------------------------------------------------------
# parser

def build_parser():
    parser = argparse.ArgumentParser(
        prog="rgbdfill",
        description="Joint RGB and depth inpainting with edge and label regularizers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--out", required=True, help="output directory for logs and checkpoints")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--data", help="dataset root with rgb/depth/label subdirectories")
    p.add_argument("--synthetic", type=int, help="train on N synthetic scenes instead")
    p.add_argument("--iters", type=int, help="target iteration count")
    p.add_argument("--size", type=int, help="square image size")
    p.add_argument("--batch", type=int, help="batch size")
    p.add_argument("--seed", type=int, help="seed for init, batches, and masks")
    p.add_argument("--base-width", type=int, help="generator channel multiplier")
    p.add_argument("--disc-width", type=int, help="discriminator channel multiplier")
    p.add_argument("--extractor-width", type=int, help="random extractor channel multiplier")
    p.add_argument("--eval-every", type=int, help="evaluate every N iterations")
    p.add_argument("--checkpoint-every", type=int, help="checkpoint every N iterations")
    p.add_argument("--device", help="torch device, default cpu")
    p.add_argument("--no-edge", action="store_true", help="disable the edge route")
    p.add_argument("--no-label", action="store_true", help="disable the label route")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="override the stored dataset root")
    p.add_argument("--synthetic", type=int, help="override with N synthetic scenes")
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--region", default="full", choices=("full", "holes"),
                   help="score full images or hole pixels only")
    p.add_argument("--max-samples", type=int, help="cap the number of scored samples")
    p.add_argument("--out", help="also write all scores as JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("inpaint", help="inpaint one RGBD sample")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--rgb", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--mask", required=True, help="binary PNG, white = missing")
    p.add_argument("--edge", help="binary edge PNG; derived from RGB when omitted")
    p.add_argument("--label", help="label-id PNG; all background when omitted")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("make-masks", help="generate stroke masks as PNGs")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-coverage", type=float, default=0.1)
    p.add_argument("--max-coverage", type=float, default=0.4)
    p.set_defaults(func=cmd_make_masks)

    p = sub.add_parser("make-edges", help="extract a binary edge map from an image")
    p.add_argument("--image", required=True)
    p.add_argument("--out", help="default: <image>_edges.png")
    p.add_argument("--low", type=float, default=100.0, help="weak threshold, 0-255 scale")
    p.add_argument("--high", type=float, default=200.0, help="strong threshold, 0-255 scale")
    p.set_defaults(func=cmd_make_edges)

    p = sub.add_parser("synth-dataset", help="write synthetic scenes as a PNG dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=9)
    p.set_defaults(func=cmd_synth_dataset)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )
    try:
        return args.func(args)
    except (ConfigError, ValueError, TypeError, KeyError, FileNotFoundError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (TrainingDivergedError, CheckpointError, MaskGenerationError,
            RuntimeError, OSError) as exc:
        log.error("run failed: %s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
