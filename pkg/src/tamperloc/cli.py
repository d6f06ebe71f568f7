"""Command-line entry point: ``tamperloc synth | train | eval | infer``.

Exit codes: 0 success, 1 usage or validation error, 2 runtime or IO error.
``TAMPERLOC_THREADS`` caps the per-sample worker pool; BLAS is pinned to one
thread so results do not depend on it.
"""
from __future__ import annotations

import argparse
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import config as rc
from .core import ConfigurationError, DimensionError
from .dataforge.dataset import DatasetError, load_dataset, load_item, list_samples, synthesize
from .metrics import evaluate
from .model import CheckpointError, TamperLocNet, load_checkpoint, save_checkpoint
from .netpbm import NetpbmError, read_pgm, read_ppm, write_pgm
from .trainer import TrainingDiverged, train, write_curve


class UsageError(Exception):
    pass


class RuntimeFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def threads():
    raw = os.environ.get("TAMPERLOC_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"TAMPERLOC_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"TAMPERLOC_THREADS must be >= 1, got {n}")
    return n


def _kv(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v


def _resolve(args, extra=()):
    try:
        return rc.resolve(args.config, list(extra) + list(args.set or ()))
    except OSError as exc:
        raise RuntimeFailure(f"cannot read config: {exc}") from None
    except rc.ConfigError as exc:
        raise UsageError(str(exc)) from None


def _build_net(cfg):
    return TamperLocNet(cfg.encoder_config(), cfg.decoder_config(), seed=cfg.seed)


def _checkpoint_config(args):
    path = args.config or Path(args.checkpoint).parent / "config.txt"
    if not Path(path).is_file():
        raise UsageError(f"no config given and {path} does not exist")
    args.config = str(path)
    return _resolve(args)


def _load_net(cfg, checkpoint):
    net = _build_net(cfg)
    try:
        load_checkpoint(net, checkpoint)
    except OSError as exc:
        raise RuntimeFailure(f"cannot read checkpoint: {exc}") from None
    except CheckpointError as exc:
        raise RuntimeFailure(str(exc)) from None
    return net


def cmd_synth(args):
    extra = []
    if args.n is not None:
        extra.append(("n", str(args.n)))
    if args.size is not None:
        extra.append(("size", str(args.size)))
    if args.seed is not None:
        extra.append(("seed", str(args.seed)))
    if args.no_augment:
        extra.append(("augment", "false"))
    if args.size is not None and not any(k == "crop" for k, _ in args.set or ()):
        extra.append(("crop", f"{args.size},{args.size}"))
    cfg = _resolve(args, extra)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        synthesize(out, cfg.n, cfg.size, cfg.seed, cfg.augment_config(), threads=threads())
        rc.write(cfg, out / "config.txt")
    except OSError as exc:
        raise RuntimeFailure(f"cannot write dataset: {exc}") from None
    print(f"wrote {cfg.n} samples to {out}")


def cmd_train(args):
    extra = []
    if args.ablate_fuse:
        extra.append(("fuse", args.ablate_fuse))
    if args.loss:
        extra.append(("loss", args.loss))
    if args.iters is not None:
        extra.append(("max_iters", str(args.iters)))
    if args.seed is not None:
        extra.append(("seed", str(args.seed)))
    cfg = _resolve(args, extra)
    try:
        items = load_dataset(args.data, threads=threads())
    except DatasetError as exc:
        raise RuntimeFailure(f"malformed dataset: {exc}") from None
    shapes = {it.image.shape for it in items}
    if len(shapes) != 1:
        raise RuntimeFailure(f"malformed dataset: images differ in size {sorted(shapes)}")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        rc.write(cfg, out / "config.txt")
        net = _build_net(cfg)
        images = np.stack([it.image for it in items])
        masks = np.stack([it.mask for it in items])
        result = train(net, images, masks, cfg.train_config(), cfg.loss_config(), out_dir=out,
                       on_log=(lambda i, lr, loss, f1: print(f"iter {i} lr {lr:.3e} loss {loss:.5f} f1 {f1:.4f}"))
                       if args.verbose else None)
        write_curve(out / "loss_curve.csv", result.curve)
        save_checkpoint(net, out / "checkpoint.bin")
    except (ConfigurationError, DimensionError) as exc:
        raise UsageError(str(exc)) from None
    except TrainingDiverged as exc:
        raise RuntimeFailure(str(exc)) from None
    except OSError as exc:
        raise RuntimeFailure(f"cannot write training outputs: {exc}") from None
    print(f"trained {cfg.max_iters} iterations; final loss {result.final_loss:.6f}; outputs in {out}")


def _predictions_from_dir(pred_dir, names):
    out = []
    for name in names:
        path = Path(pred_dir) / f"{name}.pgm"
        if not path.is_file():
            path = Path(pred_dir) / f"{name}.prob.pgm"
        try:
            out.append(read_pgm(path).astype(np.float64) / 255.0)
        except (OSError, NetpbmError) as exc:
            raise RuntimeFailure(f"{path}: {exc}") from None
    return out


def cmd_eval(args):
    if (args.checkpoint is None) == (args.predictions is None):
        raise UsageError("eval: give exactly one of --checkpoint or --predictions")
    if args.checkpoint:
        cfg = _checkpoint_config(args)
    else:
        cfg = _resolve(args)
    threshold = cfg.threshold if args.threshold is None else args.threshold
    try:
        names = list_samples(args.data)
        items = [load_item(args.data, n) for n in names]
    except DatasetError as exc:
        raise RuntimeFailure(f"malformed dataset: {exc}") from None
    if args.checkpoint:
        net = _load_net(cfg, args.checkpoint)
        with ThreadPoolExecutor(max_workers=threads()) as pool:
            try:
                probs = list(pool.map(lambda it: net.predict(it.image)[0], items))
            except DimensionError as exc:
                raise RuntimeFailure(str(exc)) from None
    else:
        probs = _predictions_from_dir(args.predictions, names)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = evaluate([(it.name, p, it.mask) for it, p in zip(items, probs)], threshold)
    out = Path(args.out or (Path(args.checkpoint).parent if args.checkpoint else args.predictions))
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(report.to_csv())
        (out / "metrics.txt").write_text(report.to_table())
    except OSError as exc:
        raise RuntimeFailure(f"cannot write metrics: {exc}") from None
    sys.stdout.write(report.to_table())


def _pad_to_multiple(img, multiple=32):
    h, w = img.shape[:2]
    ph, pw = -(-h // multiple) * multiple - h, -(-w // multiple) * multiple - w
    return np.pad(img, ((0, ph), (0, pw), (0, 0)), mode="symmetric")


def cmd_infer(args):
    cfg = _checkpoint_config(args)
    threshold = cfg.threshold if args.threshold is None else args.threshold
    net = _load_net(cfg, args.checkpoint)

    def run(path):
        path = Path(path)
        try:
            img = read_ppm(path)
        except (OSError, NetpbmError) as exc:
            raise RuntimeFailure(f"cannot read image {path}: {exc}") from None
        h, w = img.shape[:2]
        if args.pad:
            img = _pad_to_multiple(img)
        elif h % 32 or w % 32:
            raise UsageError(f"{path}: size {h}x{w} is not a multiple of 32 (use --pad)")
        prob = net.predict(img)[0][:h, :w]
        out_dir = Path(args.out) if args.out else path.parent
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = path.name[: -len(path.suffix)] if path.suffix else path.name
        write_pgm(out_dir / f"{stem}.prob.pgm", np.rint(prob * 255.0).astype(np.uint8))
        write_pgm(out_dir / f"{stem}.mask.pgm", np.where(prob > threshold, 255, 0).astype(np.uint8))
        return out_dir / f"{stem}.prob.pgm"

    with ThreadPoolExecutor(max_workers=threads()) as pool:
        try:
            written = list(pool.map(run, args.images))
        except OSError as exc:
            raise RuntimeFailure(f"cannot write outputs: {exc}") from None
    for p in written:
        print(p)


def build_parser():
    p = _Parser(prog="tamperloc", description="Image tampering localization at desk scale.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--set", action="append", type=_kv, metavar="KEY=VALUE",
                        help="override one config key (repeatable)")

    s = sub.add_parser("synth", help="synthesize a procedural forgery dataset")
    common(s)
    s.add_argument("--out", required=True)
    s.add_argument("--n", type=int)
    s.add_argument("--size", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--no-augment", action="store_true")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train the localization network")
    common(t)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--ablate-fuse", metavar="X4,X3,...", help="decoder fuse subset")
    t.add_argument("--loss", choices=("combined", "ce"))
    t.add_argument("--iters", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("-v", "--verbose", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="pixel-level AUC / F1 / IOU")
    common(e)
    e.add_argument("--data", required=True)
    e.add_argument("--checkpoint")
    e.add_argument("--predictions", help="directory of probability PGMs named like the masks")
    e.add_argument("--threshold", type=float)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    i = sub.add_parser("infer", help="write probability and mask PGMs for images")
    common(i)
    i.add_argument("--checkpoint", required=True)
    i.add_argument("images", nargs="+")
    i.add_argument("--out")
    i.add_argument("--threshold", type=float)
    i.add_argument("--pad", action="store_true", help="reflect-pad to a multiple of 32, crop back after")
    i.set_defaults(func=cmd_infer)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        with threadpool_limits(limits=1):
            args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
