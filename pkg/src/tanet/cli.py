"""Command-line entry points: ``synth``, ``train``, ``track``, ``eval``, ``sweep``, ``attn``.

Every command takes ``--config FILE`` plus ``--<key>`` overrides for any
config key and echoes the resolved configuration into its output directory.
Failures exit with status 1 (2 for usage errors) after printing a single
``error: <Type>: <message>`` line on stderr. ``TANET_VERBOSITY`` sets the log
level.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .config import RunConfig
from .data import crop_template, load_sequence, make_clip, save_sequence, to_uint8
from .synthetic import make_synthetic_sequence

log = logging.getLogger("tanet")

LOSS_LOG = "loss_log.csv"
FINAL_CHECKPOINT = "final.pt"
MODE_COLORS = {"local": (0, 255, 0), "global": (255, 0, 0)}


class CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"error: ArgumentError: {message}\n")
        raise SystemExit(2)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value config file")
    g = p.add_argument_group("config overrides")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if isinstance(f.default, bool):
            g.add_argument(flag, dest=f.name, default=None, action="store_const", const="true")
            g.add_argument("--no-" + f.name.replace("_", "-"), dest=f.name, action="store_const", const="false")
        else:
            g.add_argument(flag, dest=f.name, default=None, metavar=type(f.default).__name__.upper())


def _config(args) -> RunConfig:
    overrides = {k: getattr(args, k) for k in RunConfig.keys()}
    return RunConfig.resolve(args.config, overrides)


def _sequence_dirs(root: Path) -> list[Path]:
    if (root / "groundtruth.txt").is_file() or (root / "groundtruth_rect.txt").is_file():
        return [root]
    dirs = sorted(d for d in root.iterdir() if d.is_dir() and (d / "groundtruth.txt").is_file())
    if not dirs:
        raise CLIError(f"no sequences (directories with groundtruth.txt) under {root}")
    return dirs


def _load_all(root: Path):
    return [load_sequence(d) for d in _sequence_dirs(root)]


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(cfg.num_sequences):
        seed = cfg.seed + k
        scene = cfg.scene_config(seed)
        seq = make_synthetic_sequence(scene)
        save_sequence(seq, out / seq.name)
    cfg.echo(out)
    log.info("wrote %d sequences to %s", cfg.num_sequences, out)
    return 0


# ---------------------------------------------------------------- train

def cmd_train(args) -> int:
    from .checkpoint import build_section, read_checkpoint
    from .training import ClipDataset, Trainer, build_networks, write_loss_log

    cfg = _config(args)
    out = Path(args.out)
    cfg.echo(out)
    gen_cfg, disc_cfg = cfg.generator_config(), cfg.discriminator_config()
    seqs = _load_all(Path(args.data))
    ds = ClipDataset(seqs, gen_cfg.R, gen_cfg.L, gen_cfg.template_size)
    if cfg.num_clips:
        ds = ds.subset(cfg.num_clips, cfg.seed)
    tcfg = cfg.training_config()
    if args.resume:
        payload = read_checkpoint(args.resume)
        nets = [build_section(payload, n, c) for n, c in (
            ("generator", gen_cfg), ("appearance_discriminator", disc_cfg), ("motion_discriminator", disc_cfg))]
        trainer = Trainer(ds, tcfg, *nets)
        if "training" not in payload:
            raise CLIError(f"{args.resume} has no trainer state to resume from")
        trainer.load_state(payload["training"])
    else:
        trainer = Trainer(ds, tcfg, *build_networks(gen_cfg, disc_cfg, cfg.seed))
    run_config = asdict(cfg)
    trainer.run(checkpoint_dir=out, run_config=run_config)
    trainer.save(out / FINAL_CHECKPOINT, run_config)
    write_loss_log(out / LOSS_LOG, trainer.log)
    log.info("trained %d iterations (%d generator steps)", trainer.iteration, trainer.g_steps)
    return 0


# ---------------------------------------------------------------- track

def draw_overlay(image: np.ndarray, box, mode: str):
    """Frame with the box outline drawn at rounded pixel coordinates."""
    from PIL import Image, ImageDraw

    img = Image.fromarray(to_uint8(image))
    x0, y0 = int(round(box.x)), int(round(box.y))
    x1, y1 = int(round(box.x2)) - 1, int(round(box.y2)) - 1
    ImageDraw.Draw(img).rectangle([x0, y0, max(x1, x0), max(y1, y0)], outline=MODE_COLORS[mode])
    return img


def _attention_model(checkpoint: Optional[str]):
    if checkpoint is None:
        return None
    from .checkpoint import load_generator
    from .generator import GeneratorAttention

    return GeneratorAttention(load_generator(checkpoint))


def _track_one(job):
    seq_dir, checkpoint, tcfg, out, overlay = job
    from .tracking import NCCTracker, TrackingAborted, track_sequence, write_results

    seq = load_sequence(seq_dir)
    attention = None if tcfg.local_only else _attention_model(checkpoint)
    error = None
    try:
        results = track_sequence(seq, seq.annotations[0], NCCTracker(), attention, tcfg)
    except TrackingAborted as exc:
        results, error = exc.results, str(exc)
    write_results(out / f"{seq.name}.txt", results)
    if overlay:
        odir = out / "overlays" / seq.name
        odir.mkdir(parents=True, exist_ok=True)
        for r in results:
            draw_overlay(seq.frames[r.frame_index].image, r.box, r.mode_used).save(odir / f"{r.frame_index:05d}.png")
    return seq.name, len(results), error


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def cmd_track(args) -> int:
    cfg = _config(args)
    tcfg = cfg.tracker_config()
    if args.checkpoint is None and not tcfg.local_only:
        raise CLIError("--checkpoint is required unless --local-only is given")
    out = Path(args.out)
    cfg.echo(out)
    jobs = [(d, args.checkpoint, tcfg, out, args.overlay) for d in _sequence_dirs(Path(args.sequence))]
    failed = 0
    for name, n, error in _map(_track_one, jobs, cfg.workers):
        if error:
            failed += 1
            sys.stderr.write(f"error: TrackingAborted: {name}: {error}\n")
        log.info("%s: %d frames tracked", name, n)
    return 1 if failed else 0


# ---------------------------------------------------------------- eval

def evaluate_directory(results_dir: Path, gt_dir: Path):
    from .data import read_annotations
    from .report import sequence_report
    from .tracking import read_results

    files = sorted(p for p in Path(results_dir).glob("*.txt") if p.name != "run_config.txt")
    if not files:
        raise CLIError(f"no result files in {results_dir}")
    per_seq = {}
    for f in files:
        seq_dir = Path(gt_dir) / f.stem
        if not seq_dir.is_dir():
            raise CLIError(f"no ground truth for {f.stem} under {gt_dir}")
        per_seq[f.stem] = sequence_report(read_results(f), read_annotations(seq_dir / "groundtruth.txt"))
    return per_seq


def cmd_eval(args) -> int:
    from .report import emit_report, summarize

    cfg = _config(args)
    out = Path(args.out)
    cfg.echo(out)
    per_seq = evaluate_directory(Path(args.results), Path(args.gt))
    emit_report(summarize(per_seq), out, per_seq, plots=not args.no_plots)
    return 0


# ---------------------------------------------------------------- sweep

def cmd_sweep(args) -> int:
    from .sweep import sweep_parameters
    from .tracking import NCCTracker

    cfg = _config(args)
    grid = args.grid
    out = Path(args.out)
    cfg.echo(out)
    seqs = _load_all(Path(args.data))
    attention = None if cfg.local_only else _attention_model(args.checkpoint)
    if attention is None and not cfg.local_only:
        raise CLIError("--checkpoint is required unless --local-only is given")
    rows = sweep_parameters(seqs, grid, NCCTracker, attention, cfg.tracker_config())
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return 0


# ---------------------------------------------------------------- attn

def cmd_attn(args) -> int:
    from PIL import Image

    cfg = _config(args)
    out = Path(args.out)
    cfg.echo(out)
    model = _attention_model(args.checkpoint)
    seq = load_sequence(args.sequence)
    template = crop_template(seq.frames[0], seq.annotations[0], model.template_size)
    with open(out / "timing.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame_index", "seconds"])
        for i in range(len(seq)):
            t0 = time.perf_counter()
            clip = make_clip(seq, i, model.clip_length, model.resolution, causal=True)
            attn = model(clip, template)
            dt = time.perf_counter() - t0
            Image.fromarray(attention_to_uint8(attn)).save(out / f"attn_{i:05d}.png")
            w.writerow([i, repr(dt)])
    return 0


def attention_to_uint8(attn: np.ndarray) -> np.ndarray:
    return np.round(255.0 * np.clip(attn, 0.0, 1.0)).astype(np.uint8)


# ---------------------------------------------------------------- main

def _grid_arg(text: str):
    from .sweep import parse_grid

    try:
        return parse_grid(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tanet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="adversarial training of the attention generator")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--resume", help="checkpoint with trainer state")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("track", help="track one sequence or every sequence in a directory")
    s.add_argument("--sequence", required=True)
    s.add_argument("--checkpoint")
    s.add_argument("--out", required=True)
    s.add_argument("--overlay", action="store_true", help="also write frames with the box drawn")
    s.set_defaults(func=cmd_track)

    s = sub.add_parser("eval", help="score result files against ground truth")
    s.add_argument("--results", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="grid over tracker parameters")
    s.add_argument("--data", required=True)
    s.add_argument("--checkpoint")
    s.add_argument("--grid", required=True, type=_grid_arg, help='e.g. "beta2=4,6,8;beta1=0.7,0.8"')
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("attn", help="export per-frame attention maps")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--sequence", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_attn)

    for name in ("synth", "train", "track", "eval", "sweep", "attn"):
        _add_config_flags(sub.choices[name])
    return p


def main(argv=None) -> int:
    level = os.environ.get("TANET_VERBOSITY", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        log.debug("traceback", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
