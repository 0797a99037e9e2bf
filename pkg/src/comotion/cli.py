"""Command-line surface: train, predict, eval, gradcheck, ablate, synth.

Every run snapshots its effective configuration into a manifest before any
result is produced, results are written atomically (temp file, then rename),
and exit codes identify the failure class: 0 ok, 2 config, 3 data, 4 shape,
5 numeric, 6 internal.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cells import rollout
from .config import TrainConfig, load_config
from .data import SkeletonSequence, load_csv, save_csv, synth_generate
from .errors import ComotionError, ConfigError, DataError, ShapeError
from .losses import (
    horizons_to_frames,
    mae_csv_table,
    mae_markdown_table,
    mean_angle_error,
)
from .params import load_checkpoint, save_checkpoint
from .training import grad_check, run_ablation, train


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _hash_files(paths) -> str:
    digest = hashlib.sha256()
    for p in sorted(Path(p) for p in paths):
        digest.update(p.name.encode("utf-8"))
        digest.update(p.read_bytes())
    return digest.hexdigest()


def _load_dataset(data_dir, config: TrainConfig):
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataError(f"data directory not found: {data_dir}")
    files = sorted(data_dir.glob("*.csv"))
    if not files:
        raise DataError(f"no .csv files in {data_dir}")
    selection = list(config.joint_selection) if config.joint_selection else None
    return files, [
        load_csv(f, joint_selection=selection, frame_interval_ms=config.frame_interval_ms)
        for f in files
    ]


def _write_manifest(out_dir: Path, config: TrainConfig, data_hash: str, outputs) -> None:
    manifest = {
        "tool_version": __version__,
        "created_unix": time.time(),
        "seed": config.seed,
        "config": config.to_dict(),
        "data_sha256": data_hash,
        "outputs": list(outputs),
    }
    _atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))


# -- commands -----------------------------------------------------------------


def cmd_train(args) -> int:
    config = load_config(args.config, args.set)
    config = _apply_thread_flags(config, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files, dataset = _load_dataset(args.data, config)
    # Manifest goes first so a crashed run still records what was attempted.
    _write_manifest(out_dir, config, _hash_files(files),
                    ["checkpoint.ckpt", "history.csv"])
    result = train(dataset, config)
    _atomic_write_text(out_dir / "history.csv", result.history_csv())
    save_checkpoint(out_dir / "checkpoint.ckpt", result.params, config)
    print(f"trained {config.epochs} epochs over {len(dataset)} sequences")
    print(f"wrote {out_dir / 'checkpoint.ckpt'}")
    return 0


def cmd_predict(args) -> int:
    params, config = load_checkpoint(args.checkpoint)
    seq = load_csv(args.input, frame_interval_ms=config.frame_interval_ms)
    if seq.joint_count != config.joint_count:
        raise ShapeError(
            f"input has {seq.joint_count} joints, checkpoint expects {config.joint_count}"
        )
    if len(seq) < config.obs_len:
        raise ShapeError(
            f"input has {len(seq)} frames, checkpoint needs {config.obs_len} observed"
        )
    horizon = args.horizon if args.horizon is not None else config.pred_len
    if horizon > config.pred_len:
        raise ConfigError(
            f"horizon {horizon} exceeds the trained prediction length {config.pred_len}"
        )
    observed = SkeletonSequence(
        seq.frames[len(seq) - config.obs_len:], seq.joint_count, seq.frame_interval_ms
    )
    predicted = rollout(observed, horizon, params, config)
    out = Path(args.out)
    tmp = out.with_name(out.name + ".tmp")
    save_csv(predicted, tmp)
    tmp.replace(out)
    print(f"wrote {horizon} predicted frames to {out}")
    return 0


def cmd_eval(args) -> int:
    pred = load_csv(args.pred, frame_interval_ms=args.interval)
    truth = load_csv(args.truth, frame_interval_ms=args.interval)
    if len(pred) != len(truth) or pred.joint_count != truth.joint_count:
        raise DataError(
            f"prediction ({len(pred)} frames, {pred.joint_count} joints) misaligned "
            f"with truth ({len(truth)} frames, {truth.joint_count} joints)"
        )
    horizons = args.horizons or list(TrainConfig().horizons_ms)
    frames = horizons_to_frames(horizons, args.interval, len(pred))
    per_frame = mean_angle_error(pred, truth, frames)
    rows = {Path(args.pred).stem: {ms: per_frame[f] for ms, f in zip(horizons, frames)}}
    print(mae_markdown_table(rows, horizons), end="")
    if args.out:
        _atomic_write_text(Path(args.out), mae_csv_table(rows, horizons))
    return 0


def cmd_gradcheck(args) -> int:
    if args.config is None and not args.set:
        # Small default instance keeps the check quick while still covering
        # every sub-model.
        config = TrainConfig(joint_count=3, obs_len=4, pred_len=3)
    else:
        config = load_config(args.config, args.set)
    report = grad_check(config, instance_seed=args.instance_seed, sample_size=args.sample)
    print(report.as_text())
    return 0 if report.passed else 5


def cmd_ablate(args) -> int:
    config = load_config(args.config, args.set)
    config = _apply_thread_flags(config, args)
    _, dataset = _load_dataset(args.data, config)
    val = None
    if args.val_data:
        _, val = _load_dataset(args.val_data, config)
    result = run_ablation(dataset, config, val)
    table = result.markdown()
    print(table, end="")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write_text(out_dir / "ablation.md", table)
        _atomic_write_text(out_dir / "ablation.csv", mae_csv_table(result.rows, result.horizons_ms))
    return 0


def cmd_synth(args) -> int:
    config = load_config(args.config, args.set)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = config.synth_frames or config.window_len
    names = []
    for i in range(config.synth_count):
        seq = synth_generate(
            config.synth_kind, config.joint_count, frames,
            seed=config.seed + i, frame_interval_ms=config.frame_interval_ms,
        )
        name = f"{config.synth_kind}_{i:03d}.csv"
        tmp = out_dir / (name + ".tmp")
        save_csv(seq, tmp)
        tmp.replace(out_dir / name)
        names.append(name)
    print(f"wrote {len(names)} sequences to {out_dir}")
    return 0


# -- argument parsing -----------------------------------------------------------


def _apply_thread_flags(config: TrainConfig, args) -> TrainConfig:
    updates = {}
    if getattr(args, "threads", None):
        updates["threads"] = args.threads
    if getattr(args, "deterministic", False):
        updates["deterministic"] = True
    return dataclasses.replace(config, **updates) if updates else config


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="comotion",
        description="Co-attention recurrent predictor for skeleton motion sequences",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on CSV sequences")
    _add_config_args(p)
    p.add_argument("--data", required=True, help="directory of training CSV files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, help="batch-parallel gradient workers")
    p.add_argument("--deterministic", action="store_true",
                   help="force ordered gradient reduction (always on; flag kept for scripts)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="roll out future frames from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="observed sequence CSV")
    p.add_argument("--horizon", type=int, help="frames to predict (default: trained length)")
    p.add_argument("--out", required=True, help="output CSV of predicted frames")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="angle-error table for a prediction vs truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--horizons", type=int, nargs="+", metavar="MS",
                   help="horizons in milliseconds")
    p.add_argument("--interval", type=float, default=40.0, help="frame interval in ms")
    p.add_argument("--out", help="also write the table as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of the pipeline gradient")
    _add_config_args(p)
    p.add_argument("--sample", type=int, help="entries per parameter group (default: all)")
    p.add_argument("--instance-seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="train all attention variants and tabulate MAE")
    _add_config_args(p)
    p.add_argument("--data", required=True)
    p.add_argument("--val-data")
    p.add_argument("--out", help="directory for ablation tables")
    p.add_argument("--threads", type=int)
    p.add_argument("--deterministic", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="generate synthetic skeleton sequences")
    _add_config_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


_CATEGORY = {2: "config", 3: "data", 4: "shape", 5: "numeric", 6: "internal"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ComotionError as exc:
        code = exc.exit_code
        print(f"error[{_CATEGORY.get(code, 'internal')}]: {exc}", file=sys.stderr)
        return code
    except Exception as exc:  # pragma: no cover - safety net
        print(f"error[internal]: {exc}", file=sys.stderr)
        return 6


if __name__ == "__main__":
    sys.exit(main())
