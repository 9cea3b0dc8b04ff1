"""Command-line surface: Stokes products, training, fusion, evaluation,
dataset preparation.

Exit codes: 0 on success, 1 on validation/configuration errors, 2 on
I/O errors (including checkpoint/manifest checksum failures).
"""

import argparse
import math
import os
import sys

import numpy as np

from . import checkpoint as checkpoint_mod
from . import config as config_mod
from . import dataset as dataset_mod
from . import imgio, metrics, stokes, training
from .autodiff import Tensor, no_grad
from .errors import DataError, PolfuseError, ValidationError
from .network import MLSN

_HALF_PI = math.pi / 2.0


def _cmd_stokes(args):
    if args.mosaic is not None:
        pattern = config_mod.parse_pattern(args.pattern)
        mosaic = stokes.DofpMosaic(imgio.read_gray(args.mosaic), pattern)
        stack = stokes.demosaic_dofp(mosaic)
    else:
        paths = (args.i0, args.i45, args.i90, args.i135)
        if any(p is None for p in paths):
            raise ValidationError(
                "provide either --mosaic or all of --i0 --i45 --i90 --i135"
            )
        stack = stokes.PolarizationStack(*(imgio.read_gray(p) for p in paths))
    products = stokes.stokes_from_angles(stack)
    os.makedirs(args.out, exist_ok=True)
    outputs = (
        ("S0.png", products.s0, 0.0, 2.0),
        ("DOLP.png", products.dolp, 0.0, 1.0),
        ("AOP.png", products.aop, -_HALF_PI, _HALF_PI),
    )
    for name, plane, lo, hi in outputs:
        path = os.path.join(args.out, name)
        imgio.write_png8(path, stokes.to_display(plane, lo, hi))
        print(path)
    return 0


def _load_run_config(args):
    if args.config is not None:
        cfg = config_mod.load_config(args.config)
    else:
        cfg = config_mod.RunConfig()
    if getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise ValidationError("--seed must be >= 0")
        cfg.seed = args.seed
    return cfg


def _cmd_train(args):
    cfg = _load_run_config(args)
    result = training.train_run(
        cfg,
        dataset_root=args.data if args.data is not None else None,
        out_dir=args.out if args.out is not None else None,
    )
    print(result.log_path)
    print(result.checkpoint_path)
    return 0


def _model_from_checkpoint(path):
    config_text, entries = checkpoint_mod.load_checkpoint(path)
    cfg = config_mod.parse_config(config_text) if config_text.strip() else config_mod.RunConfig()
    model = MLSN(cfg.network, rng=cfg.seed)
    params = model.model_params()
    params.load_state(entries)
    model.eval()
    return model


def _fuse_planes(model, s0_norm, dolp):
    with no_grad():
        pred = model(
            Tensor(s0_norm[None, None, :, :]),
            Tensor(dolp[None, None, :, :]),
        )
    return np.asarray(pred.data[0, 0], dtype=np.float64)


def _cmd_fuse(args):
    model = _model_from_checkpoint(args.checkpoint)
    s0_norm = imgio.read_gray(args.s0)
    dolp = imgio.read_gray(args.dolp)
    fused = _fuse_planes(model, s0_norm, dolp)
    imgio.write_png8(args.out, fused)
    print(args.out)
    return 0


def _find_fused(fused_dir, scene_name):
    for ext in dataset_mod.PLANE_EXTENSIONS:
        path = os.path.join(fused_dir, scene_name + ext)
        if os.path.isfile(path):
            return path
    raise DataError("no fused image for %s under %s" % (scene_name, fused_dir))


def _cmd_eval(args):
    if (args.fused is None) == (args.checkpoint is None):
        raise ValidationError("provide exactly one of --fused or --checkpoint")
    scenes = dataset_mod.build_index(args.data)
    model = None if args.checkpoint is None else _model_from_checkpoint(args.checkpoint)
    reports = []
    for scene in scenes:
        s0_norm, dolp = dataset_mod.load_pair(scene)
        if model is None:
            fused = imgio.read_gray(_find_fused(args.fused, scene.name))
            if fused.shape != s0_norm.shape:
                raise ValidationError(
                    "fused image for %s has extents %r, sources have %r"
                    % (scene.name, fused.shape, s0_norm.shape)
                )
        else:
            fused = _fuse_planes(model, s0_norm, dolp)
        reports.append(metrics.evaluate_pair(fused, s0_norm, dolp, pair=scene.name))
    metrics.write_csv(args.out, reports)
    print(args.out)
    return 0


def _cmd_dataset_split(args):
    pattern = config_mod.parse_pattern(args.pattern)
    if not os.path.isdir(args.mosaics):
        raise DataError("mosaic directory %s not found" % args.mosaics)
    names = sorted(
        n for n in os.listdir(args.mosaics)
        if os.path.splitext(n)[1].lower() in dataset_mod.PLANE_EXTENSIONS
    )
    if not names:
        raise DataError("no mosaic images under %s" % args.mosaics)
    os.makedirs(args.out, exist_ok=True)
    rel_paths = []
    for index, name in enumerate(names):
        mosaic = stokes.DofpMosaic(
            imgio.read_gray(os.path.join(args.mosaics, name)), pattern
        )
        stack = stokes.demosaic_dofp(mosaic)
        products = stokes.stokes_from_angles(stack)
        scene_name = "scene_%04d" % index
        scene_dir = os.path.join(args.out, scene_name)
        os.makedirs(scene_dir, exist_ok=True)
        full_res = (
            ("I000.png", stack.i0), ("I045.png", stack.i45),
            ("I090.png", stack.i90), ("I135.png", stack.i135),
        )
        for fname, plane in full_res:
            imgio.write_png16(os.path.join(scene_dir, fname), plane)
            rel_paths.append(os.path.join(scene_name, fname))
        display = (
            ("S0.png", products.s0, 0.0, 2.0),
            ("DOLP.png", products.dolp, 0.0, 1.0),
            ("AOP.png", products.aop, -_HALF_PI, _HALF_PI),
        )
        for fname, plane, lo, hi in display:
            imgio.write_png8(
                os.path.join(scene_dir, fname), stokes.to_display(plane, lo, hi)
            )
            rel_paths.append(os.path.join(scene_name, fname))
    manifest = dataset_mod.write_manifest(args.out, rel_paths)
    print(manifest)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="polfuse",
        description="Polarization image fusion toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stokes", help="compute S0/DOLP/AOP images")
    p.add_argument("--i0"), p.add_argument("--i45")
    p.add_argument("--i90"), p.add_argument("--i135")
    p.add_argument("--mosaic", help="single DoFP mosaic instead of four planes")
    p.add_argument("--pattern", default=config_mod.format_pattern(stokes.DEFAULT_PATTERN))
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_stokes)

    p = sub.add_parser("train", help="train the fusion network")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--data", help="dataset root (overrides config)")
    p.add_argument("--out", help="run output directory (overrides config)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("fuse", help="fuse one S0/DOLP pair with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--s0", required=True, help="normalized intensity image")
    p.add_argument("--dolp", required=True)
    p.add_argument("--out", required=True, help="output PNG path")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("eval", help="score fused images against their sources")
    p.add_argument("--fused", help="directory of <scene>.png fused images")
    p.add_argument("--checkpoint", help="fuse on the fly with this checkpoint")
    p.add_argument("--data", required=True, help="dataset root with scene_* dirs")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("dataset-split", help="split DoFP mosaics into scene trees")
    p.add_argument("--mosaics", required=True, help="directory of mosaic images")
    p.add_argument("--pattern", default=config_mod.format_pattern(stokes.DEFAULT_PATTERN))
    p.add_argument("--out", required=True, help="dataset root to create")
    p.set_defaults(func=_cmd_dataset_split)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except PolfuseError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


def entry():
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
