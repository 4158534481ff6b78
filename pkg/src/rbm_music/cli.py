"""Command-line interface: ``rbm-music <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Every command accepts ``--json`` for a machine-readable summary on stdout.
A run-config file (``key = value`` lines) may be given with ``--config`` or
the ``RBM_MUSIC_CONFIG`` environment variable; command-line flags win.
"""

from __future__ import annotations

import argparse
from dataclasses import asdict
import json
import logging
import os
from pathlib import Path
import sys
import time

import numpy as np

from . import checkpoint
from .analysis import EmbeddingSet, energy_protocol, hidden_embedding, tsne
from .composer import ComposeConfig, compose_piece
from .pianoroll import (
    DEFAULT_SHIFTS,
    WINDOW_COLS,
    MeterError,
    RollDataset,
    augment,
    rasterize,
    read_pbm,
    resize_binary,
    roll_to_score,
    segment,
    write_pbm,
)
from .rbm import make_rng
from .scoreio import MidiError, is_common_time, parse_idx, parse_midi, parse_pgm, write_midi
from .trainer import TrainConfig, reconstruct, train

log = logging.getLogger("rbm_music")

CONFIG_ENV = "RBM_MUSIC_CONFIG"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

CONFIG_KEYS = {
    "hidden_units": int,
    "cd_steps": int,
    "learning_rate": float,
    "epochs": int,
    "batch_size": int,
    "seed": int,
    "weight_init_stddev": float,
    "initial_budget": int,
    "extension_budget": int,
    "extensions": int,
    "hidden_samples": int,
    "energy_samples": int,
    "perplexity": float,
    "iterations": int,
    "manifest": str,
    "checkpoint": str,
    "out_dir": str,
}
TRAIN_KEYS = ("hidden_units", "cd_steps", "learning_rate", "epochs", "batch_size",
              "seed", "weight_init_stddev")
COMPOSE_KEYS = ("initial_budget", "extension_budget", "extensions", "seed", "hidden_samples")
MANIFEST_HEADER = ("path", "source", "measure", "shift")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# --- run config -------------------------------------------------------------

def parse_run_config(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or not key:
            raise UsageError(f"config line {lineno}: expected 'key = value'")
        if key not in CONFIG_KEYS:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](value)
        except ValueError:
            raise UsageError(f"config line {lineno}: bad value for {key}: {value!r}") from None
    return values


def _settings(args) -> dict:
    path = args.config or os.environ.get(CONFIG_ENV)
    values = {}
    if path:
        try:
            values = parse_run_config(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _pick(settings: dict, keys) -> dict:
    return {k: settings[k] for k in keys if k in settings}


# --- manifests and images ---------------------------------------------------

def write_manifest(path: Path, rows) -> None:
    lines = ["\t".join(MANIFEST_HEADER)]
    lines += [f"{p}\t{src}\t{m}\t{s}" for p, src, m, s in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path) -> RollDataset:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from None
    if not lines or tuple(lines[0].split("\t")) != MANIFEST_HEADER:
        raise DataError(f"{path}: missing manifest header")
    ds = RollDataset()
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise DataError(f"{path}:{lineno}: expected 4 tab-separated fields")
        rel, source, measure, shift = fields
        window = read_pbm((path.parent / rel).read_bytes(), width=WINDOW_COLS)
        ds.append(window, source, int(measure), int(shift))
    return ds


def load_window(spec: str, threshold: int = 128) -> np.ndarray:
    """A 72x192 binary window from a P4 PBM, a P5 PGM or an IDX file.

    IDX images are picked with ``path@index`` (default index 0).
    """
    path, _, index = spec.partition("@")
    data = Path(path).read_bytes()
    if data[:2] == b"P4":
        return read_pbm(data, width=WINDOW_COLS)
    if data[:2] == b"P5":
        return resize_binary(parse_pgm(data), threshold)
    if data[:4] == b"\x00\x00\x08\x03":
        images = parse_idx(data)
        i = int(index or 0)
        if not 0 <= i < len(images):
            raise DataError(f"{path}: image index {i} out of range ({len(images)} images)")
        return resize_binary(images[i], threshold)
    raise DataError(f"{path}: unrecognized image format")


def pixel_scores(pred, target) -> dict:
    pred = np.asarray(pred, dtype=bool).ravel()
    target = np.asarray(target, dtype=bool).ravel()
    tp = int(np.sum(pred & target))
    precision = tp / pred.sum() if pred.sum() else (1.0 if not target.any() else 0.0)
    recall = tp / target.sum() if target.sum() else (1.0 if not pred.any() else 0.0)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": float(precision), "recall": float(recall), "f1": float(f1)}


# --- commands ---------------------------------------------------------------

def cmd_ingest(args, settings) -> dict:
    midi_dir = Path(args.midi_dir)
    if not midi_dir.is_dir():
        raise DataError(f"{midi_dir} is not a directory")
    files = sorted(p for p in midi_dir.iterdir()
                   if p.suffix.lower() in (".mid", ".midi") and p.is_file())
    if not files:
        raise DataError(f"no MIDI files in {midi_dir}")
    shifts = DEFAULT_SHIFTS if args.shifts is None else tuple(
        int(s) for s in args.shifts.split(",") if s.strip())

    base = RollDataset()
    accepted, rejected, unreadable, dropped_notes = 0, 0, 0, 0
    for path in files:
        try:
            score = parse_midi(path.read_bytes())
        except (OSError, MidiError) as exc:
            log.warning("skipping %s: %s", path.name, exc)
            unreadable += 1
            continue
        if not is_common_time(score):
            log.info("skipping %s: not in 4/4", path.name)
            rejected += 1
            continue
        strip, dropped = rasterize(score)
        dropped_notes += dropped
        accepted += 1
        for i, window in enumerate(segment(strip)):
            base.append(window, path.stem, 2 * i, 0)
    if accepted == 0:
        raise DataError("no 4/4 input among the MIDI files")
    dataset = augment(base, shifts)
    if not len(dataset):
        raise DataError("no two-measure windows produced")

    manifest = Path(args.out_manifest)
    out_dir = manifest.parent / (manifest.stem + "_windows")
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for window, (source, measure, shift) in zip(dataset.windows, dataset.provenance):
        name = f"{source}_m{measure:04d}_s{shift:+d}.pbm"
        (out_dir / name).write_bytes(write_pbm(window))
        rows.append((f"{out_dir.name}/{name}", source, measure, shift))
    write_manifest(manifest, rows)
    return {"files_accepted": accepted, "files_rejected_meter": rejected,
            "files_unreadable": unreadable, "notes_out_of_range": dropped_notes,
            "base_windows": len(base), "windows": len(dataset),
            "transpositions_rejected": dataset.rejected, "manifest": str(manifest)}


def cmd_train(args, settings) -> dict:
    manifest = settings.get("manifest")
    ckpt = settings.get("checkpoint")
    if not manifest or not ckpt:
        raise UsageError("train needs a manifest and an output checkpoint")
    config = TrainConfig(**_pick(settings, TRAIN_KEYS))
    data = read_manifest(manifest).visible()
    if not len(data):
        raise DataError("manifest lists no windows")
    init = None
    if args.resume and Path(ckpt).exists():
        init = checkpoint.load(ckpt)
        if init.P != config.hidden_units:
            log.info("resuming with P=%d from checkpoint", init.P)
    params, report = train(data, config, init=init)
    checkpoint.save(ckpt, params)
    report_path = Path(args.report) if args.report else Path(ckpt).with_suffix(".report.tsv")
    lines = ["epoch\treconstruction_error\tfree_energy\tseconds"]
    lines += ["\t".join(map(repr, row)) for row in report.rows()]
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"checkpoint": str(ckpt), "report": str(report_path),
            "config": asdict(config), "windows": int(len(data)),
            "final_reconstruction_error": (report.reconstruction_error[-1]
                                           if report.reconstruction_error else None)}


def cmd_compose(args, settings) -> dict:
    params = checkpoint.load(args.checkpoint)
    cfg = ComposeConfig(**_pick(settings, COMPOSE_KEYS))
    strip = compose_piece(params, cfg)
    prefix = Path(args.out_prefix)
    pbm, mid = prefix.with_suffix(".pbm"), prefix.with_suffix(".mid")
    pbm.write_bytes(write_pbm(strip))
    mid.write_bytes(write_midi(roll_to_score(strip)))
    return {"pbm": str(pbm), "midi": str(mid), "width": int(strip.shape[1]),
            "measures": int(strip.shape[1] // 96), "cells": int(strip.sum()),
            "config": asdict(cfg)}


def cmd_reconstruct(args, settings) -> dict:
    if args.k < 1:
        raise UsageError("k must be >= 1")
    params = checkpoint.load(args.checkpoint)
    window = load_window(args.image, args.threshold)
    seed = settings.get("seed", 0)
    out = reconstruct(params, window.ravel(), args.k, make_rng(seed)).reshape(window.shape)
    Path(args.output).write_bytes(write_pbm(out))
    scores = pixel_scores(out, window)
    return {"output": args.output, "k": args.k, **scores}


def cmd_energy(args, settings) -> dict:
    params = checkpoint.load(args.checkpoint)
    samples = settings.get("energy_samples", 10)
    rng = make_rng(settings.get("seed", 0))
    reports = [energy_protocol(params, load_window(spec, args.threshold), samples, rng, label=spec)
               for spec in args.images]
    reports.sort(key=lambda r: r.mean_energy)
    return {"rows": [asdict(r) for r in reports]}


def cmd_embed(args, settings) -> dict:
    params = checkpoint.load(args.checkpoint)
    manifest = settings.get("manifest") or args.manifest
    ds = read_manifest(manifest)
    if len(ds) < 3:
        raise DataError("need at least 3 windows to embed")
    seed = settings.get("seed", 0)
    rng = make_rng(seed)
    emb = EmbeddingSet()
    for window, (source, measure, shift) in zip(ds.windows, ds.provenance):
        emb.add(f"{source}:{measure}:{shift:+d}", hidden_embedding(params, window, args.mode, rng))
    perplexity = settings.get("perplexity", min(30.0, (len(ds) - 1) / 3))
    emb.projections = tsne(emb.matrix(), perplexity, settings.get("iterations", 1000), seed)
    Path(args.output).write_text(emb.to_tsv(), encoding="utf-8")
    return {"output": args.output, "points": len(ds), "perplexity": perplexity}


def bench_images(path: str | None, limit: int | None) -> np.ndarray:
    """Binarized (>= 128) images from an IDX file, or the digit stand-in at MNIST's shape."""
    if path:
        images = parse_idx(Path(path).read_bytes())
    else:
        from .corpus import digit_images
        images = digit_images(limit or 60_000)
    if limit:
        images = images[:limit]
    return np.stack([img.pixels.ravel() >= 128 for img in images]).astype(np.float64)


def run_bench(X: np.ndarray, hidden_counts, threads, batch_size=64, seed=0) -> list[dict]:
    from threadpoolctl import threadpool_limits

    rows = []
    for n_threads in threads:
        for P in hidden_counts:
            cfg = TrainConfig(hidden_units=P, cd_steps=1, learning_rate=0.01, epochs=1,
                              batch_size=batch_size, seed=seed)
            with threadpool_limits(limits=n_threads):
                t0 = time.perf_counter()
                train(X, cfg)
                elapsed = time.perf_counter() - t0
            rows.append({"hidden_units": P, "threads": n_threads, "seconds": elapsed})
    return rows


def cmd_bench(args, settings) -> dict:
    X = bench_images(args.idx, args.limit)
    rows = run_bench(X, args.hidden, args.threads, settings.get("batch_size", 64),
                     settings.get("seed", 0))
    return {"images": int(X.shape[0]), "rows": rows}


# --- plain-text rendering ---------------------------------------------------

def _render(command: str, summary: dict) -> str:
    if command == "energy":
        lines = ["label\tmean\tstddev\tsamples"]
        lines += [f"{r['label']}\t{r['mean_energy']:.6g}\t{r['stddev']:.6g}\t{r['samples']}"
                  for r in summary["rows"]]
        return "\n".join(lines)
    if command == "bench":
        lines = ["hidden_units\tthreads\tseconds"]
        lines += [f"{r['hidden_units']}\t{r['threads']}\t{r['seconds']:.4f}"
                  for r in summary["rows"]]
        return "\n".join(lines)
    return "\n".join(f"{k}: {v}" for k, v in summary.items() if not isinstance(v, dict))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common_options(top_level: bool) -> argparse.ArgumentParser:
    # the subcommand copies must not reset values given before the command
    default = {} if top_level else {"default": argparse.SUPPRESS}
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"run-config file (default: ${CONFIG_ENV})", **default)
    common.add_argument("--json", action="store_true", help="print a JSON summary", **default)
    common.add_argument("-v", "--verbose", action="store_true", **default)
    common.add_argument("--seed", type=int, **default)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rbm-music", parents=[_common_options(True)],
                     description="Train, sample and analyse an RBM over piano-roll windows.")
    common = _common_options(False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="MIDI directory -> PBM windows + manifest")
    p.add_argument("midi_dir")
    p.add_argument("out_manifest")
    p.add_argument("--shifts", help="comma-separated semitone shifts (default -5..-1,1..6)")

    p = sub.add_parser("train", parents=[common], help="CD training from a manifest")
    p.add_argument("manifest", nargs="?")
    p.add_argument("-o", "--checkpoint")
    p.add_argument("--report")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--hidden-units", dest="hidden_units", type=int)
    p.add_argument("--cd-steps", dest="cd_steps", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--weight-init-stddev", dest="weight_init_stddev", type=float)

    p = sub.add_parser("compose", parents=[common], help="generate a multi-measure piece")
    p.add_argument("checkpoint")
    p.add_argument("out_prefix")
    p.add_argument("--initial-budget", dest="initial_budget", type=int)
    p.add_argument("--extension-budget", dest="extension_budget", type=int)
    p.add_argument("--extensions", type=int)
    p.add_argument("--hidden-samples", dest="hidden_samples", type=int)

    p = sub.add_parser("reconstruct", parents=[common], help="Gibbs reconstruction of an image")
    p.add_argument("checkpoint")
    p.add_argument("image", help="PBM window, PGM, or IDX file (path@index)")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("-k", type=int, default=1)
    p.add_argument("--threshold", type=int, default=128)

    p = sub.add_parser("energy", parents=[common], help="energy table for images")
    p.add_argument("checkpoint")
    p.add_argument("images", nargs="+")
    p.add_argument("--samples", dest="energy_samples", type=int)
    p.add_argument("--threshold", type=int, default=128)

    p = sub.add_parser("embed", parents=[common], help="hidden embeddings + t-SNE projection")
    p.add_argument("checkpoint")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--perplexity", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--mode", choices=("probabilities", "sampled"), default="probabilities")

    p = sub.add_parser("bench", parents=[common], help="CPU training-time benchmark")
    p.add_argument("--idx", help="IDX3 image file (default: generated stand-in)")
    p.add_argument("--hidden", type=int, nargs="+", default=[64, 256, 1024])
    p.add_argument("--threads", type=int, nargs="+", default=[1])
    p.add_argument("--limit", type=int, help="use only the first N images")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    return parser


COMMANDS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "compose": cmd_compose,
    "reconstruct": cmd_reconstruct,
    "energy": cmd_energy,
    "embed": cmd_embed,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = _settings(args)
        if args.command == "train":
            if args.manifest:
                settings["manifest"] = args.manifest
            if args.checkpoint:
                settings["checkpoint"] = args.checkpoint
        summary = COMMANDS[args.command](args, settings)
    except UsageError as exc:
        return _fail(args, EXIT_USAGE, str(exc))
    except (DataError, OSError, ValueError) as exc:
        # format and validation errors from the library are all ValueErrors
        return _fail(args, EXIT_DATA, str(exc))
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        return _fail(args, EXIT_INTERNAL, f"internal error: {exc}")
    summary = {"command": args.command, "ok": True, **summary}
    print(json.dumps(summary) if args.json else _render(args.command, summary))
    return EXIT_OK


def _fail(args, code: int, message: str) -> int:
    if args.json:
        print(json.dumps({"command": args.command, "ok": False, "exit_code": code,
                          "error": message}))
    print(f"rbm-music {args.command}: {message}", file=sys.stderr)
    return code


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
