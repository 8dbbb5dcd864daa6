"""``plm`` command line: pretrain, learn, forget, recall-dump, eval."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import RunConfig, build_config, dump_config, load_config_file
from .data import N_CLASSES, Dataset75, export_image_pgm, resolve_images_file, split_groups
from .engine import (
    DivergenceError,
    PlmPair,
    evaluate_groups,
    load_checkpoint,
    new_pair,
    pretrain,
    recall_errors,
    run_selective_forgetting,
    run_selective_learning,
    save_checkpoint,
    storage_errors,
    synthesize,
)
from .errors import ConfigError, FormatError, NumericError, RangeError
from .report import render_svg, sha256_file, write_csv, write_manifest

log = logging.getLogger("plm")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_IO = 4
EXIT_DIVERGENCE = 5
EXIT_RANGE = 6

# fields that do not influence results and would make manifests path-dependent
_MANIFEST_SKIP = ("out",)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--mnist", help="IDX training-images file or the directory holding it")
    p.add_argument("--ckpt", help="PLMCKPT1 checkpoint (output of pretrain, input elsewhere)")
    p.add_argument("--out", help="output directory (default runs/<command>)")
    p.add_argument("--seed", type=int, help="base seed; init/split/sampler/dither seeds derive from it")
    p.add_argument("--bias", help="group probabilities a,b,c")
    p.add_argument("--iters", type=int)
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--lr", type=float, dest="learning_rate", help="storage learning rate")
    p.add_argument("--recall-lr", type=float, dest="recall_learning_rate")
    p.add_argument("--replicas", type=int)
    p.add_argument("--dither", type=float, dest="dither_amplitude", help="peak-to-peak dither width")
    p.add_argument("--dropout", type=float, dest="dropout_rate")
    p.add_argument(
        "--dither-class-input",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="also dither the recall net's one-hot class input",
    )
    p.add_argument("--epochs", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plm", description="Perpetual Learning Machine experiments")
    parser.add_argument("--version", action="version", version=f"plm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("pretrain", "train storage and recall nets on the 75 images, write a checkpoint"),
        ("learn", "selective learning: biased SGD of the storage net from scratch"),
        ("forget", "selective forgetting: biased PSGD from a pretrained checkpoint"),
        ("recall-dump", "write recalled digits as PGM images"),
        ("eval", "report storage and recall errors of a checkpoint"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "recall-dump":
            p.add_argument("--classes", help="e.g. 0-9 or 0,5,12")
            p.add_argument(
                "--originals", action="store_true", default=None, help="also dump the source digits (needs --mnist)"
            )
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    flags = {
        k: v
        for k, v in vars(args).items()
        if k not in ("command", "config", "verbose") and v is not None
    }
    cfg = build_config(file_values, flags)
    if cfg.out == RunConfig.out:
        cfg.out = str(Path("runs") / args.command)
    return cfg.resolve(args.command)


def parse_classes(text: str) -> list[int]:
    classes: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                classes.extend(range(lo, hi + 1))
            else:
                classes.append(int(part))
        except ValueError as exc:
            raise ConfigError(f"bad class list {text!r}") from exc
    for c in classes:
        if not 0 <= c < N_CLASSES:
            raise RangeError(f"class {c} outside 0..{N_CLASSES - 1}")
    if not classes:
        raise ConfigError("empty class list")
    return classes


def _need(value, flag: str):
    if value is None:
        raise ConfigError(f"{flag} is required for this command")
    return value


def _load_pair(path: str | None) -> PlmPair:
    ckpt = Path(_need(path, "--ckpt"))
    if not ckpt.is_file():
        # an absent checkpoint is reported like an unreadable one
        raise FormatError(f"{ckpt}: no such checkpoint")
    return load_checkpoint(ckpt)


def _manifest_entries(command: str, cfg: RunConfig) -> list[tuple[str, str]]:
    entries = [("tool", "plm"), ("version", __version__), ("command", command)]
    for line in dump_config(cfg, skip=_MANIFEST_SKIP).splitlines():
        k, v = line.split(" = ", 1)
        entries.append((f"config.{k}", v))
    if cfg.mnist:
        entries.append(("input.mnist.sha256", sha256_file(resolve_images_file(cfg.mnist))))
    if cfg.ckpt and command != "pretrain":
        entries.append(("input.ckpt.sha256", sha256_file(cfg.ckpt)))
    return entries


def _finish(out: Path, command: str, cfg: RunConfig, artifacts: Sequence[Path], started: float) -> None:
    write_manifest(out / "manifest.txt", _manifest_entries(command, cfg), artifacts)
    # wall-clock time lives apart from the manifest so reruns stay byte-identical
    (out / "timing.txt").write_text(f"duration_seconds = {time.perf_counter() - started:.3f}\n")


def cmd_pretrain(cfg: RunConfig) -> int:
    started = time.perf_counter()
    data = Dataset75.from_idx(_need(cfg.mnist, "--mnist"))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = Path(cfg.ckpt) if cfg.ckpt else out / "pretrained.ckpt"
    plm = new_pair(cfg.init_seed)  # type: ignore[arg-type]

    def progress(epoch: int, pair: PlmPair) -> None:
        if epoch % 10 == 0:
            log.info("epoch %d: storage_err=%d recall_err=%d", epoch, storage_errors(pair, data), recall_errors(pair))

    pretrain(plm, data, cfg.epochs, cfg.train_config(), order_seed=cfg.sampler_seed, progress=progress)  # type: ignore[arg-type]
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(plm, ckpt)
    print(f"storage_err={storage_errors(plm, data)}/{N_CLASSES} recall_err={recall_errors(plm)}/{N_CLASSES}")
    print(f"checkpoint: {ckpt}")
    _finish(out, "pretrain", cfg, [ckpt], started)
    return EXIT_OK


def _emit_curves(out: Path, log_, cfg: RunConfig) -> list[Path]:
    csv_path, svg_path = out / "curves.csv", out / "curves.svg"
    write_csv(log_, csv_path)
    if len(log_):
        render_svg(log_, svg_path, probs=cfg.bias_schedule().probs)
        return [csv_path, svg_path]
    return [csv_path]


def _run_curves(command: str, cfg: RunConfig) -> int:
    started = time.perf_counter()
    data = Dataset75.from_idx(_need(cfg.mnist, "--mnist"))
    groups = split_groups(cfg.split_seed)  # type: ignore[arg-type]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if command == "learn":
            metrics = run_selective_learning(cfg.experiment_config(stop_when_learned=True), data, groups)
        else:
            plm = _load_pair(cfg.ckpt)
            metrics = run_selective_forgetting(cfg.experiment_config(stop_when_learned=False), plm, data, groups)
    except DivergenceError as exc:
        _emit_curves(out, exc.log, cfg)
        raise
    artifacts = _emit_curves(out, metrics, cfg)
    last = metrics.rows[-1]
    print(f"iterations={last[0]} err_g1={last[1]:.4f} err_g2={last[2]:.4f} err_g3={last[3]:.4f}")
    print(f"curves: {artifacts[0]}")
    _finish(out, command, cfg, artifacts, started)
    return EXIT_OK


def cmd_recall_dump(cfg: RunConfig) -> int:
    classes = parse_classes(cfg.classes)
    plm = _load_pair(cfg.ckpt)
    data = Dataset75.from_idx(_need(cfg.mnist, "--mnist")) if cfg.originals else None
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for c in classes:
        export_image_pgm(synthesize(plm.recall, c), out / f"recall_{c:03d}.pgm")
        if data is not None:
            export_image_pgm(data.images[c], out / f"original_{c:03d}.pgm")
    print(f"wrote {len(classes)} recalled digits to {out}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig) -> int:
    plm = _load_pair(cfg.ckpt)
    data = Dataset75.from_idx(_need(cfg.mnist, "--mnist"))
    e1, e2, e3 = evaluate_groups(plm.storage, data, split_groups(cfg.split_seed))  # type: ignore[arg-type]
    print(f"storage_err={storage_errors(plm, data)}/{N_CLASSES} recall_err={recall_errors(plm)}/{N_CLASSES}")
    print(f"err_g1={e1:.4f} err_g2={e2:.4f} err_g3={e3:.4f}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        cfg = resolve_config(args)
        if args.command == "pretrain":
            return cmd_pretrain(cfg)
        if args.command in ("learn", "forget"):
            return _run_curves(args.command, cfg)
        if args.command == "recall-dump":
            return cmd_recall_dump(cfg)
        return cmd_eval(cfg)
    except RangeError as exc:
        print(f"plm: range error: {exc}", file=sys.stderr)
        return EXIT_RANGE
    except ConfigError as exc:
        print(f"plm: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"plm: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except NumericError as exc:
        where = f" (iteration {exc.iteration})" if exc.iteration is not None else ""
        print(f"plm: divergence{where}: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as exc:
        print(f"plm: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
