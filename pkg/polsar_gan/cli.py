"""
Command-line entry point: synth | train | evaluate | generate | compare-dist | pcolor.

Data (training CSV, evaluation tables, KS summaries) goes to standard output;
logs and the single-line error diagnostic go to standard error.
"""

import argparse
import logging
import sys
from typing import List, Optional

import numpy as np

from . import checkpoint, data, gan, metrics
from .errors import ModelMismatchError, PolsarGanError

logger = logging.getLogger(__name__)

CSV_HEADER = "epoch,l_labeled,l_unlabeled,l_generated,l_generator"


def _at_least(lower: int):
    def parse(text: str) -> int:
        value = int(text)
        if value < lower:
            raise argparse.ArgumentTypeError(f"must be >= {lower}, got {value}")
        return value
    return parse


def _unit_interval(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {value}")
    return value


def _channels(text: str) -> tuple:
    return tuple(int(c) for c in text.split(","))


# ==============================================================================
# SUBCOMMANDS
# ==============================================================================

def cmd_synth(args) -> int:
    raster = data.generate_scene(
        num_classes = args.classes,
        layout      = args.layout,
        looks       = args.looks,
        seed        = args.seed,
        height      = args.height,
        width       = args.width,
    )
    data.save_raster(raster, args.out, args.labels)
    logger.info(f"[synth] wrote {args.out} and {args.labels}")
    return 0


def cmd_train(args) -> int:
    raster  = data.load_raster(args.data, args.labels)
    config  = gan.TrainingConfig(
        num_classes  = raster.num_classes,
        patch_size   = args.patch,
        lr           = args.lr,
        beta1        = args.beta1,
        beta2        = args.beta2,
        batch_size   = args.batch,
        epochs       = args.epochs,
        m            = args.m,
        latent_dim   = args.latent,
        seed         = args.seed,
        mode         = args.mode,
        g_channels   = args.g_channels,
        d_channels   = args.d_channels,
        patch_stride = args.stride,
        dtype        = args.dtype,
    )
    patches = data.extract_patches(raster, config.patch_size, config.stride)
    spec    = data.SplitSpec(
        labeled_ratio      = args.per_class_ratio,
        labeled_count      = args.per_class_count,
        unlabeled_fraction = args.unlabeled_fraction,
        seed               = args.seed,
    )
    splits = data.split(patches, spec)

    print(CSV_HEADER, flush=True)

    def emit(epoch: int, b: gan.LossBreakdown) -> None:
        print(f"{epoch},{b.l_labeled:.10g},{b.l_unlabeled:.10g},"
              f"{b.l_generated:.10g},{b.l_generator:.10g}", flush=True)

    model, _ = gan.train(config, splits, callback=emit)
    checkpoint.save_checkpoint(model, args.out)

    if len(splits.test):
        ev = gan.evaluate_model(model, splits.test)
        logger.info(f"[train] held-out OA={ev.oa:.4f} AA={ev.aa:.4f} Kappa={ev.kappa:.4f}")
    return 0


def cmd_evaluate(args) -> int:
    model   = checkpoint.load_checkpoint(args.model)
    raster  = data.load_raster(args.data, args.labels)
    if raster.num_classes != model.config.num_classes:
        raise ModelMismatchError(
            f"checkpoint has K = {model.config.num_classes} but {args.labels} holds "
            f"K = {raster.num_classes}"
        )
    patches = data.extract_patches(raster, model.config.patch_size, model.config.stride)
    ev      = gan.evaluate_model(model, patches)

    ev.per_class.to_csv(sys.stdout, index=False, lineterminator="\n")
    print(f"# oa={ev.oa!r}")
    print(f"# aa={ev.aa!r}")
    print(f"# kappa={ev.kappa!r}")
    metrics.write_confusion_csv(ev.confusion, args.out)
    return 0


def cmd_generate(args) -> int:
    model = checkpoint.load_checkpoint(args.model)
    fakes = model.generate(args.count, np.random.default_rng(args.seed))
    data.save_raster(data.tile_patches(fakes, ncols=args.cols), args.out)
    logger.info(f"[generate] wrote {args.count} patches to {args.out}")
    return 0


def cmd_compare_dist(args) -> int:
    real_re, real_im = data.raster_to_planes(data.load_raster(args.real).pixels)
    gen_re, gen_im   = data.raster_to_planes(data.load_raster(args.gen).pixels)

    reports = []
    for name in args.channels:
        ch = data.CHANNELS.index(name)
        for plane, a, g in (("re", real_re, gen_re), ("im", real_im, gen_im)):
            reports.append(metrics.histogram_compare(a[ch], g[ch], bins=args.bins,
                                                     channel=name, plane=plane))
    metrics.write_histogram_csv(reports, args.out)

    print("channel,plane,ks")
    for r in reports:
        print(f"{r.channel},{r.plane},{r.ks!r}")
    return 0


def cmd_pcolor(args) -> int:
    raster = data.load_raster(args.data)
    metrics.write_ppm(metrics.pcolor_export(raster), args.out)
    logger.info(f"[pcolor] wrote {raster.height}x{raster.width} image to {args.out}")
    return 0


# ==============================================================================
# PARSER
# ==============================================================================

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(
        prog="polsar-gan",
        description="Semi-supervised complex-valued GAN for PolSAR classification",
        formatter_class=fmt,
    )
    p.add_argument("--log-level", default="INFO",
                   choices=("DEBUG", "INFO", "WARNING", "ERROR"), help="stderr log level")
    sub = p.add_subparsers(dest="command", required=True)

    # --- Synth ---
    s = sub.add_parser("synth", formatter_class=fmt,
                       help="write a synthetic complex-Wishart scene (CTM1 + LBL1)")
    s.add_argument("--classes", type=_at_least(2), default=3, help="number of classes K")
    s.add_argument("--height", type=_at_least(1), default=128, help="raster rows")
    s.add_argument("--width", type=_at_least(1), default=128, help="raster columns")
    s.add_argument("--looks", type=_at_least(1), default=data.DEFAULT_LOOKS,
                   help="number of looks L")
    s.add_argument("--layout", choices=("blocks", "stripes"), default="blocks",
                   help="class arrangement")
    s.add_argument("--seed", type=int, default=0, help="scene seed")
    s.add_argument("--out", required=True, help="CTM1 pixel file")
    s.add_argument("--labels", required=True, help="LBL1 label file")
    s.set_defaults(func=cmd_synth)

    # --- Train ---
    t = sub.add_parser("train", formatter_class=fmt,
                       help="train and write a CVG1 checkpoint; per-epoch CSV on stdout")
    g_io = t.add_argument_group("IO")
    g_io.add_argument("--data", required=True, help="CTM1 pixel file")
    g_io.add_argument("--labels", required=True, help="LBL1 label file")
    g_io.add_argument("--out", required=True, help="CVG1 checkpoint path")

    g_split = t.add_argument_group("Labeled / unlabeled split")
    quota = g_split.add_mutually_exclusive_group(required=True)
    quota.add_argument("--per-class-count", type=_at_least(1), help="labeled patches per class")
    quota.add_argument("--per-class-ratio", type=float, help="labeled fraction of each class")
    g_split.add_argument("--unlabeled-fraction", type=_unit_interval, default=0.1,
                         help="fraction of all patches in the unlabeled pool")

    g_opt = t.add_argument_group("Training")
    g_opt.add_argument("--patch", type=_at_least(1), default=32, help="patch size P")
    g_opt.add_argument("--stride", type=_at_least(1), default=None,
                       help="patch extraction stride; unset means P")
    g_opt.add_argument("--lr", type=float, default=5e-4, help="Adam learning rate")
    g_opt.add_argument("--beta1", type=float, default=0.5, help="Adam first-moment decay")
    g_opt.add_argument("--beta2", type=float, default=0.999, help="Adam second-moment decay")
    g_opt.add_argument("--epochs", type=_at_least(1), default=100, help="training epochs")
    g_opt.add_argument("--batch", type=_at_least(2), default=64, help="sub-batch size B")
    g_opt.add_argument("--m", type=_at_least(1), default=8, help="CBN statistics memory")
    g_opt.add_argument("--latent", type=_at_least(1), default=100, help="latent width per plane")
    g_opt.add_argument("--g-channels", type=_channels, default=(64, 32, 16),
                       help="generator widths, comma separated")
    g_opt.add_argument("--d-channels", type=_channels, default=(16, 32, 64),
                       help="discriminator widths, comma separated")
    g_opt.add_argument("--mode", choices=gan.MODES, default="semisup", help="training mode")
    g_opt.add_argument("--dtype", choices=tuple(gan.DTYPES), default="float64",
                       help="network precision")
    g_opt.add_argument("--seed", type=int, default=0, help="split, init and batch seed")
    t.set_defaults(func=cmd_train)

    # --- Evaluate ---
    e = sub.add_parser("evaluate", formatter_class=fmt,
                       help="score a checkpoint on every labeled patch")
    e.add_argument("--data", required=True, help="CTM1 pixel file")
    e.add_argument("--labels", required=True, help="LBL1 label file")
    e.add_argument("--model", required=True, help="CVG1 checkpoint")
    e.add_argument("--out", required=True, help="confusion matrix CSV")
    e.set_defaults(func=cmd_evaluate)

    # --- Generate ---
    g = sub.add_parser("generate", formatter_class=fmt,
                       help="sample the generator into a tiled CTM1 raster")
    g.add_argument("--model", required=True, help="CVG1 checkpoint")
    g.add_argument("--count", type=_at_least(1), default=16, help="patches to generate")
    g.add_argument("--cols", type=_at_least(1), default=None,
                   help="tiles per row; unset means one row")
    g.add_argument("--seed", type=int, default=0, help="latent seed")
    g.add_argument("--out", required=True, help="CTM1 output")
    g.set_defaults(func=cmd_generate)

    # --- Compare-dist ---
    c = sub.add_parser("compare-dist", formatter_class=fmt,
                       help="histograms and KS statistics, real vs generated")
    c.add_argument("--real", required=True, help="CTM1 of actual data")
    c.add_argument("--gen", required=True, help="CTM1 of generated data")
    c.add_argument("--bins", type=_at_least(1), default=64, help="histogram bins")
    c.add_argument("--channels", nargs="+", choices=data.CHANNELS, default=["T11", "T12"],
                   help="channels to compare")
    c.add_argument("--out", required=True, help="histogram CSV")
    c.set_defaults(func=cmd_compare_dist)

    # --- Pcolor ---
    pc = sub.add_parser("pcolor", formatter_class=fmt,
                        help="(T11, T22, T33) false-color PPM")
    pc.add_argument("--data", required=True, help="CTM1 pixel file")
    pc.add_argument("--out", required=True, help="PPM output")
    pc.set_defaults(func=cmd_pcolor)

    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PolsarGanError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
