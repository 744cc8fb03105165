"""Command-line entry point: ``ecgmae <command> [options]``.

Every command accepts ``--config FILE`` holding flat ``key = value`` lines
(keys are flag names, dashes or underscores). Flags given on the command
line win over the file. Relative input paths that do not exist are looked
up under ``$ECGMAE_DATA_ROOT``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .convnext1d import PRESETS, ClassifierHead, ModelConfig, build_encoder, get_preset
from .errors import EcgMaeError, EmptyDataset, IndexOutOfRange, InvalidConfig, MissingPath
from .eval import compare_report, confusion_csv, evaluate, metrics_csv
from .fcmae import DEFAULT_MASK_RATIO, Decoder, generate_mask, reconstruct_demo, write_reconstruction_csv
from .preprocess import (
    SyntheticEcgConfig,
    build_splits,
    detect_r_peaks,
    distribution_table,
    read_segments,
    synth_ecg,
    toy_segments,
    unlabeled_segments,
    write_manifest,
    write_segments,
)
from .preprocess.segments import SegmentDataset
from .rng import stream
from .train import AugmentConfig, TrainConfig, finetune, load_checkpoint, pretrain, save_checkpoint
from .wfdb_io import DEFAULT_GAIN, Annotation, list_records, load_record_dir, write_record

log = logging.getLogger("ecgmae")

DATA_ROOT_ENV = "ECGMAE_DATA_ROOT"
_NOT_CONFIGURABLE = {"help", "config", "command"}


# ---------------------------------------------------------------- config

def read_config(path) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    if not os.path.isfile(path):
        raise MissingPath(f"config file not found: {path}")
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise InvalidConfig(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _as_bool(text: str, key: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise InvalidConfig(f"{key}: expected a boolean, got {text!r}")


def _apply_config(sub: argparse.ArgumentParser, values: dict[str, str]):
    actions = {a.dest: a for a in sub._actions if a.dest not in _NOT_CONFIGURABLE}
    unknown = sorted(set(values) - set(actions))
    if unknown:
        raise InvalidConfig(f"unknown config keys for this command: {', '.join(unknown)}")
    defaults = {}
    for key, text in values.items():
        act = actions[key]
        if isinstance(act, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            defaults[key] = _as_bool(text, key)
        elif act.type is not None:
            try:
                defaults[key] = act.type(text)
            except (TypeError, ValueError):
                raise InvalidConfig(f"{key}: cannot parse {text!r}") from None
        else:
            defaults[key] = text
        if act.choices is not None and defaults[key] not in act.choices:
            raise InvalidConfig(f"{key}: {text!r} not one of {sorted(act.choices)}")
    sub.set_defaults(**defaults)


def _resolve_input(path, what: str) -> str:
    if path is None:
        raise InvalidConfig(f"--{what} is required")
    if os.path.exists(path):
        return path
    root = os.environ.get(DATA_ROOT_ENV)
    if root and not os.path.isabs(path) and os.path.exists(os.path.join(root, path)):
        return os.path.join(root, path)
    raise MissingPath(f"{what} not found: {path}")


def _log_config(args):
    items = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    log.info("resolved config: %s", " ".join(f"{k}={v}" for k, v in items.items()))


def _load_segments(path, what="data") -> SegmentDataset:
    return read_segments(_resolve_input(path, what))


# --------------------------------------------------------------- commands

def cmd_preprocess(args) -> int:
    mitdb = _resolve_input(args.mitdb or ("mitdb" if os.environ.get(DATA_ROOT_ENV) else None), "mitdb")
    names = list_records(mitdb)
    if not names:
        raise EmptyDataset(f"no WFDB records (.hea files) in {mitdb}")
    mit = [load_record_dir(mitdb, n) for n in names]
    incart = []
    if args.incartdb:
        d = _resolve_input(args.incartdb, "incartdb")
        incart = [load_record_dir(d, n) for n in list_records(d)]
    split = build_splits(mit, incart, val_fraction=args.val_fraction, seed=args.seed, lead=args.lead)
    os.makedirs(args.out, exist_ok=True)
    outputs = {"ds1_train": split.ds1_train, "ds1_val": split.ds1_val, "ds2_test": split.ds2_test,
               "finetune_pool": split.finetune_pool()}
    if incart:
        outputs["incartdb"] = split.extra_finetune
    if args.unlabeled:
        pre = []
        for d in args.unlabeled:
            d = _resolve_input(d, "unlabeled")
            pre += [unlabeled_segments(load_record_dir(d, n))[0] for n in list_records(d)]
        outputs["pretrain"] = SegmentDataset.concat(*pre)
    for name, ds in outputs.items():
        write_segments(os.path.join(args.out, f"{name}.ecgb"), ds)
    write_manifest(os.path.join(args.out, "manifest.tsv"), split)
    rows = [("MITDB-DS1 (train)", split.ds1_train), ("MITDB-DS1 (validation)", split.ds1_val),
            ("MITDB-DS2 (test)", split.ds2_test)]
    if incart:
        rows.append(("INCARTDB", split.extra_finetune))
    print(distribution_table(rows))
    return 0


def _train_config(args, **extra) -> TrainConfig:
    aug = AugmentConfig(mixup_alpha=getattr(args, "mixup_alpha", 0.2),
                        noise_sigma=getattr(args, "noise_sigma", 0.01),
                        use_mixup=not getattr(args, "no_mixup", True),
                        use_noise=not getattr(args, "no_noise", True))
    return TrainConfig(batch_size=args.batch_size, epochs=args.epochs, lr_initial=args.lr,
                       lr_min=args.lr_min, seed=args.seed, augment=aug,
                       weight_decay=args.weight_decay, **extra)


def cmd_pretrain(args) -> int:
    data = _load_segments(args.data)
    encoder = build_encoder(get_preset(args.preset), seed=args.seed)
    decoder = Decoder(encoder.config.feature_dim, decoder_dim=args.decoder_dim, seed=args.seed)
    cfg = _train_config(args, mask_ratio=args.mask_ratio, momentum=args.momentum)
    ckpt = pretrain(encoder, decoder, data, cfg, log_path=args.log)
    save_checkpoint(args.out, ckpt)
    print(f"pretrain: {len(data)} segments, final loss {ckpt.meta['history'][-1]['loss']:.6f}, "
          f"checkpoint {args.out}")
    return 0


def cmd_finetune(args) -> int:
    data = _load_segments(args.data)
    val = _load_segments(args.val, "val") if args.val else None
    encoder = build_encoder(get_preset(args.preset), seed=args.seed)
    if args.checkpoint:
        load_checkpoint(_resolve_input(args.checkpoint, "checkpoint")).load_into(encoder, "encoder")
    elif not args.supervised:
        raise InvalidConfig("--checkpoint (a pre-trained encoder) is required unless --supervised")
    if not args.supervised:
        encoder.freeze()
    head = ClassifierHead(encoder.config.feature_dim, hidden=args.hidden, seed=args.seed)
    ckpt = finetune(encoder, head, data, _train_config(args), supervised=args.supervised,
                    val=val, log_path=args.log)
    save_checkpoint(args.out, ckpt)
    print(f"finetune ({ckpt.config['mode']}): {len(data)} segments, "
          f"final loss {ckpt.meta['history'][-1]['loss']:.6f}, checkpoint {args.out}")
    return 0


def _model_from_checkpoint(ckpt):
    if "head" not in ckpt.config:
        raise InvalidConfig("checkpoint has no classifier head; run finetune first")
    encoder = build_encoder(ModelConfig.from_dict(ckpt.config["encoder"]))
    ckpt.load_into(encoder, "encoder")
    h = ckpt.config["head"]
    head = ClassifierHead(h["in_dim"], hidden=h["hidden"], n_classes=h["n_classes"])
    ckpt.load_into(head, "head")
    return encoder, head


def cmd_evaluate(args) -> int:
    ckpt = load_checkpoint(_resolve_input(args.checkpoint, "checkpoint"))
    data = _load_segments(args.data)
    encoder, head = _model_from_checkpoint(ckpt)
    m = evaluate(encoder, head, data, batch_size=args.batch_size)
    print(m.summary())
    name = args.name or f"{ckpt.config.get('mode', 'model')}/{ckpt.config['encoder'].get('name', '')}"
    csv_text, table = compare_report([(name, m)])
    print(table, end="")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(metrics_csv(m))
    if args.confusion:
        with open(args.confusion, "w") as fh:
            fh.write(confusion_csv(m))
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(csv_text)
    return 0


def cmd_reconstruct(args) -> int:
    ckpt = load_checkpoint(_resolve_input(args.checkpoint, "checkpoint"))
    if "decoder" not in ckpt.config:
        raise InvalidConfig("checkpoint has no decoder; use a pretrain checkpoint")
    data = _load_segments(args.data)
    if not 0 <= args.index < len(data):
        raise IndexOutOfRange(f"segment index {args.index} outside [0, {len(data)})")
    encoder = build_encoder(ModelConfig.from_dict(ckpt.config["encoder"]))
    ckpt.load_into(encoder, "encoder")
    d = ckpt.config["decoder"]
    decoder = Decoder(d["in_dim"], decoder_dim=d["decoder_dim"], patch_size=d["patch_size"])
    ckpt.load_into(decoder, "decoder")
    n_patches = data.samples.shape[1] // decoder.patch_size
    plan = generate_mask(n_patches, args.mask_ratio, stream(args.mask_seed, "reconstruct.mask"))
    triplet = reconstruct_demo(encoder, decoder, data.samples[args.index], plan)
    write_reconstruction_csv(args.out, triplet)
    err = float(np.mean((triplet[2] - triplet[0])[np.repeat(plan.as_array(), decoder.patch_size)] ** 2))
    print(f"reconstruct: segment {args.index}, masked patches {list(plan.masked)}, "
          f"masked MSE {err:.6f}, wrote {args.out}")
    return 0


def cmd_synth(args) -> int:
    if args.format == "ecgb":
        ds = toy_segments(args.count, seed=args.seed, labeled=args.labels == "toy")
        write_segments(args.out, ds)
        counts = ds.class_counts()
        print(f"synth: {len(ds)} segments -> {args.out} "
              + " ".join(f"{k}={v}" for k, v in counts.items() if v))
        return 0
    cfg = SyntheticEcgConfig(duration=args.duration, heart_rate=args.heart_rate,
                             noise_sigma=args.noise_sigma, seed=args.seed)
    sig, centers = synth_ecg(cfg)
    adc = np.round(sig * DEFAULT_GAIN).astype(np.int64)
    anns = [Annotation(int(c), "N") for c in centers] if args.labels == "toy" else None
    write_record(args.out, args.record_name, adc[None, :], cfg.fs, fmt=212, annotations=anns)
    n_peaks = len(detect_r_peaks(sig, cfg.fs)) if sig.size > 2 * cfg.fs else len(centers)
    print(f"synth: {args.record_name} {sig.size} samples, {len(centers)} beats generated, "
          f"{n_peaks} detected -> {args.out}")
    return 0


# ----------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", default=None, help="flat key = value file; flags override it")
    p.add_argument("--seed", type=int, default=0, help="root seed for every random stream")


def _train_flags(p, *, epochs, batch, lr, wd):
    p.add_argument("--data", default=None, help="ECGB segment file")
    p.add_argument("--preset", default="atto", choices=sorted(PRESETS), help="encoder size")
    p.add_argument("--epochs", type=int, default=epochs)
    p.add_argument("--batch-size", type=int, default=batch)
    p.add_argument("--lr", type=float, default=lr, help="initial learning rate (cosine to --lr-min)")
    p.add_argument("--lr-min", type=float, default=0.0)
    p.add_argument("--weight-decay", type=float, default=wd)
    p.add_argument("--log", default=None, help="training-log CSV path")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="ecgmae", description="Masked-autoencoder pre-training and beat classification for ECG.",
                                     formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sp = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = subs["preprocess"] = sp.add_parser("preprocess", help="WFDB records -> ECGB splits", formatter_class=fmt)
    _common(p)
    p.add_argument("--mitdb", default=None, help=f"MITDB directory (default ${DATA_ROOT_ENV}/mitdb)")
    p.add_argument("--incartdb", default=None, help="INCARTDB directory, added to the fine-tune pool")
    p.add_argument("--unlabeled", nargs="*", default=None, help="WFDB directories for the pre-training set")
    p.add_argument("--out", default="segments", help="output directory")
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--lead", type=int, default=0, help="lead used for labeled beats")
    p.set_defaults(func=cmd_preprocess)

    p = subs["pretrain"] = sp.add_parser("pretrain", help="masked-autoencoder pre-training", formatter_class=fmt)
    _common(p)
    _train_flags(p, epochs=500, batch=512, lr=0.01, wd=1e-4)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--mask-ratio", type=float, default=DEFAULT_MASK_RATIO)
    p.add_argument("--decoder-dim", type=int, default=64)
    p.add_argument("--out", default="pretrain.ckpt", help="checkpoint path")
    p.set_defaults(func=cmd_pretrain)

    p = subs["finetune"] = sp.add_parser("finetune", help="train the classifier head", formatter_class=fmt)
    _common(p)
    _train_flags(p, epochs=100, batch=1024, lr=3e-4, wd=0.0)
    p.add_argument("--checkpoint", default=None, help="pre-trained checkpoint")
    p.add_argument("--val", default=None, help="ECGB validation file")
    p.add_argument("--supervised", action="store_true", help="train encoder and head from scratch")
    p.add_argument("--hidden", type=int, default=128, help="MLP head hidden width")
    p.add_argument("--mixup-alpha", type=float, default=0.2)
    p.add_argument("--noise-sigma", type=float, default=0.01)
    p.add_argument("--no-mixup", action="store_true")
    p.add_argument("--no-noise", action="store_true")
    p.add_argument("--out", default="finetune.ckpt", help="checkpoint path")
    p.set_defaults(func=cmd_finetune)

    p = subs["evaluate"] = sp.add_parser("evaluate", help="accuracy and per-class metrics", formatter_class=fmt)
    _common(p)
    p.add_argument("--checkpoint", default=None, help="fine-tuned checkpoint")
    p.add_argument("--data", default=None, help="labeled ECGB file")
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--name", default=None, help="row name in the comparison table")
    p.add_argument("--out", default=None, help="per-class metrics CSV")
    p.add_argument("--confusion", default=None, help="5x5 confusion matrix CSV")
    p.add_argument("--report", default=None, help="comparison-table CSV")
    p.set_defaults(func=cmd_evaluate)

    p = subs["reconstruct"] = sp.add_parser("reconstruct", help="masked reconstruction of one segment",
                                            formatter_class=fmt)
    _common(p)
    p.add_argument("--checkpoint", default=None, help="pre-training checkpoint")
    p.add_argument("--data", default=None, help="ECGB file")
    p.add_argument("--index", type=int, default=0, help="segment index")
    p.add_argument("--mask-seed", type=int, default=0)
    p.add_argument("--mask-ratio", type=float, default=DEFAULT_MASK_RATIO)
    p.add_argument("--out", default="reconstruction.csv")
    p.set_defaults(func=cmd_reconstruct)

    p = subs["synth"] = sp.add_parser("synth", help="synthetic WFDB record or ECGB file", formatter_class=fmt)
    _common(p)
    p.add_argument("--format", default="wfdb", choices=["wfdb", "ecgb"])
    p.add_argument("--out", default="synth", help="directory (wfdb) or file (ecgb)")
    p.add_argument("--record-name", default="synth")
    p.add_argument("--duration", type=float, default=60.0, help="seconds (wfdb)")
    p.add_argument("--heart-rate", type=float, default=72.0, help="bpm (wfdb)")
    p.add_argument("--noise-sigma", type=float, default=0.0, help="mV (wfdb)")
    p.add_argument("--labels", default="none", choices=["none", "toy"],
                   help="toy: N/VEB labels (ecgb) or N annotations (wfdb)")
    p.add_argument("--count", type=int, default=256, help="segments (ecgb)")
    p.set_defaults(func=cmd_synth)
    return parser, subs


def parse_args(argv=None) -> argparse.Namespace:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        _apply_config(subs[args.command], read_config(args.config))
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        _log_config(args)
        return args.func(args)
    except EcgMaeError as exc:
        print(f"error[{type(exc).__name__}]: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error[{type(exc).__name__}]: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
