"""Alternating optimisation of the generator and the two discriminators."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np
import torch

from .data import Sequence, clip_indices, clip_masks, crop_template, resize_and_normalize
from .discriminators import AppearanceDiscriminator, DiscriminatorConfig, MotionDiscriminator
from .errors import TrainingDivergedError
from .generator import AttentionGenerator, GeneratorConfig
from .losses import bce_loss, discriminator_loss, generator_adversarial_term

log = logging.getLogger(__name__)

G_STEP, DA_STEP, DM_STEP = "G-step", "Da-step", "Dm-step"


@dataclass(frozen=True)
class TrainingConfig:
    lambda1: float = 0.2
    lambda2: float = 0.1
    n1: int = 5
    n2: int = 3
    batch_size: int = 8
    lr_g: float = 1e-4
    lr_da: float = 1e-4
    lr_dm: float = 1e-4
    adagrad_eps: float = 1e-10
    max_iters: int = 1000
    seed: int = 0
    checkpoint_every: int = 0
    bce_form: str = "two-sided"
    adversarial_form: str = "saturating"
    freeze_discriminators: bool = False
    schedule: str = "alternating"

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be non-negative")
        if self.n1 < 0 or self.n2 < 0:
            raise ValueError("n1 and n2 must be non-negative (0 disables that discriminator)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if min(self.lr_g, self.lr_da, self.lr_dm) <= 0:
            raise ValueError("learning rates must be positive")
        if self.bce_form not in ("two-sided", "one-sided"):
            raise ValueError(f"bce_form must be 'two-sided' or 'one-sided', got {self.bce_form!r}")
        if self.adversarial_form not in ("saturating", "non-saturating"):
            raise ValueError(f"unknown adversarial_form {self.adversarial_form!r}")
        if self.schedule not in ("alternating", "generator-only"):
            raise ValueError(f"schedule must be 'alternating' or 'generator-only', got {self.schedule!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def step_role(iteration: int, n1: int, n2: int) -> str:
    """Role of an iteration; the appearance check takes precedence over the motion check."""
    if n1 > 0 and iteration % n1 == 1:
        return DA_STEP
    if n2 > 0 and iteration % n2 == 1:
        return DM_STEP
    return G_STEP


def schedule(num_iters: int, n1: int, n2: int) -> list[str]:
    return [step_role(i, n1, n2) for i in range(num_iters)]


@dataclass
class LossBreakdown:
    iter: int
    role: str
    bce: Optional[float] = None
    app_adv: Optional[float] = None
    mot_adv: Optional[float] = None
    total: Optional[float] = None


# ---------------------------------------------------------------- data

class ClipDataset:
    """Training samples ``(clip, mask sequence, template)`` drawn from sequences.

    Frames are resized once up front. The template of a sequence is the exact
    crop of its first annotated box.
    """

    def __init__(self, sequences: Iterable[Sequence], R: int, L: int, template_size: int,
                 items: Optional[list[tuple[int, int]]] = None):
        self.sequences = list(sequences)
        self.R, self.L, self.template_size = R, L, template_size
        self._frames, self._templates = [], []
        for seq in self.sequences:
            self._frames.append(np.stack([resize_and_normalize(f, R)[0] for f in seq.frames]))
            self._templates.append(crop_template(seq.frames[0], seq.annotations[0], template_size))
        if items is None:
            items = [(s, c) for s, seq in enumerate(self.sequences) for c in range(len(seq))]
        self.items = list(items)
        if not self.items:
            raise ValueError("dataset has no samples")

    def __len__(self) -> int:
        return len(self.items)

    def subset(self, count: int, seed: int) -> "ClipDataset":
        """A copy restricted to ``count`` samples chosen with ``seed``."""
        rng = np.random.default_rng(seed)
        pick = rng.choice(len(self.items), size=min(count, len(self.items)), replace=False)
        out = object.__new__(ClipDataset)
        out.__dict__.update(self.__dict__)
        out.items = [self.items[i] for i in sorted(pick)]
        return out

    def batch(self, indices) -> dict[str, torch.Tensor]:
        clips, masks, templates = [], [], []
        for k in indices:
            s, c = self.items[int(k)]
            idx = clip_indices(c, self.L, len(self.sequences[s]))
            clips.append(self._frames[s][idx])
            masks.append(clip_masks(self.sequences[s], idx, self.R))
            templates.append(self._templates[s])
        return {
            "clip": torch.from_numpy(np.stack(clips)).permute(0, 4, 1, 2, 3).contiguous(),
            "masks": torch.from_numpy(np.stack(masks)),
            "template": torch.from_numpy(np.stack(templates)).permute(0, 3, 1, 2).contiguous(),
        }

    def sample(self, rng: np.random.Generator, size: int) -> dict[str, torch.Tensor]:
        return self.batch(rng.integers(0, len(self.items), size=size))


def _cast(batch: dict[str, torch.Tensor], dtype) -> dict[str, torch.Tensor]:
    return {k: v.to(dtype) for k, v in batch.items()}


def _pairs(batch: dict[str, torch.Tensor], maps: torch.Tensor):
    """Flatten clips into per-frame (image, map) pairs for the appearance discriminator."""
    clip = batch["clip"]
    n, _, L, R, _ = clip.shape
    frames = clip.permute(0, 2, 1, 3, 4).reshape(n * L, 3, R, R)
    return frames, maps.reshape(n * L, 1, R, R)


# ---------------------------------------------------------------- loss terms

def appearance_adversarial_terms(batch, generator, app_disc, fake_maps=None, form="saturating"):
    """``(d_loss, g_term)`` of the appearance game on one batch.

    ``fake_maps`` may be passed to reuse a generator forward; pass detached maps
    when the result only updates the discriminator.
    """
    if fake_maps is None:
        fake_maps = generator(batch["clip"], batch["template"])
    frames, real = _pairs(batch, batch["masks"])
    _, fake = _pairs(batch, fake_maps)
    real_scores = app_disc(frames, real)
    fake_scores = app_disc(frames, fake)
    return discriminator_loss(real_scores, fake_scores), generator_adversarial_term(fake_scores, form)


def motion_adversarial_terms(batch, generator, mot_disc, fake_maps=None, form="saturating"):
    """``(d_loss, g_term)`` of the motion game: real tube vs. tube of generated maps."""
    if fake_maps is None:
        fake_maps = generator(batch["clip"], batch["template"])
    real_scores = mot_disc(batch["clip"], batch["masks"])
    fake_scores = mot_disc(batch["clip"], fake_maps)
    return discriminator_loss(real_scores, fake_scores), generator_adversarial_term(fake_scores, form)


def combine_terms(bce: float, app: Optional[float], mot: Optional[float], lambda1: float, lambda2: float) -> float:
    """Weighted sum of the generator terms; a skipped (``None``) term contributes nothing."""
    total = bce
    if app is not None:
        total = total + lambda1 * app
    if mot is not None:
        total = total + lambda2 * mot
    return total


def generator_total_loss(batch, generator, app_disc, mot_disc, cfg: TrainingConfig,
                         iteration: int = 0) -> tuple[torch.Tensor, LossBreakdown]:
    """Pixel loss plus weighted adversarial terms; zero-weight terms are not evaluated."""
    maps = generator(batch["clip"], batch["template"])
    bce = bce_loss(maps, batch["masks"], one_sided=cfg.bce_form == "one-sided")
    total = bce
    rec = LossBreakdown(iteration, G_STEP, bce=bce.item())
    if cfg.lambda1 > 0:
        _, g_app = appearance_adversarial_terms(batch, generator, app_disc, maps, cfg.adversarial_form)
        total = total + cfg.lambda1 * g_app
        rec.app_adv = g_app.item()
    if cfg.lambda2 > 0:
        _, g_mot = motion_adversarial_terms(batch, generator, mot_disc, maps, cfg.adversarial_form)
        total = total + cfg.lambda2 * g_mot
        rec.mot_adv = g_mot.item()
    rec.total = combine_terms(rec.bce, rec.app_adv, rec.mot_adv, cfg.lambda1, cfg.lambda2)
    return total, rec


# ---------------------------------------------------------------- evaluation

@torch.no_grad()
def attention_iou(generator: AttentionGenerator, batch, threshold: float = 0.5) -> float:
    """Mean mask IoU of the thresholded centre-frame map against ground truth.

    Samples whose centre frame has no target are skipped.
    """
    was_training = generator.training
    generator.eval()
    dtype = next(generator.parameters()).dtype
    maps = generator.predict_attention(batch["clip"].to(dtype), batch["template"].to(dtype), mode="track")[:, 0]
    generator.train(was_training)
    gt = batch["masks"][:, batch["masks"].shape[1] // 2] > 0.5
    pred = maps > threshold
    ious = []
    for p, g in zip(pred, gt):
        if not g.any():
            continue
        union = (p | g).sum().item()
        ious.append((p & g).sum().item() / union)
    return float(np.mean(ious)) if ious else 0.0


# ---------------------------------------------------------------- trainer

def _check_finite(name: str, value: torch.Tensor, iteration: int) -> None:
    v = float(value.detach()) if isinstance(value, torch.Tensor) else float(value)
    if not math.isfinite(v):
        raise TrainingDivergedError(name, iteration, v)


class Trainer:
    """Runs the alternating schedule one iteration at a time.

    Each role draws its batches from its own seeded stream, so the generator
    sees the same data whether or not discriminator steps run in between.
    """

    def __init__(self, dataset: ClipDataset, cfg: TrainingConfig,
                 generator: AttentionGenerator, app_disc: AppearanceDiscriminator,
                 mot_disc: MotionDiscriminator):
        self.dataset, self.cfg = dataset, cfg
        self.generator, self.app_disc, self.mot_disc = generator, app_disc, mot_disc
        self.dtype = next(generator.parameters()).dtype
        adagrad = lambda m, lr: torch.optim.Adagrad(m.parameters(), lr=lr, eps=cfg.adagrad_eps,
                                                    initial_accumulator_value=0.0)
        self.opt_g = adagrad(generator, cfg.lr_g)
        self.opt_da = adagrad(app_disc, cfg.lr_da)
        self.opt_dm = adagrad(mot_disc, cfg.lr_dm)
        streams = np.random.SeedSequence(cfg.seed).spawn(3)
        self.rngs = {role: np.random.default_rng(s) for role, s in zip((G_STEP, DA_STEP, DM_STEP), streams)}
        self.iteration = 0
        self.g_steps = 0
        self.log: list[LossBreakdown] = []

    def role(self, iteration: int) -> str:
        if self.cfg.schedule == "generator-only":
            return G_STEP
        return step_role(iteration, self.cfg.n1, self.cfg.n2)

    def _batch(self, role: str):
        return _cast(self.dataset.sample(self.rngs[role], self.cfg.batch_size), self.dtype)

    def _generator_step(self, it: int) -> LossBreakdown:
        batch = self._batch(G_STEP)
        for d in (self.app_disc, self.mot_disc):
            d.requires_grad_(False)
        try:
            self.opt_g.zero_grad(set_to_none=True)
            total, rec = generator_total_loss(batch, self.generator, self.app_disc, self.mot_disc, self.cfg, it)
            for name in ("bce", "app_adv", "mot_adv", "total"):
                v = getattr(rec, name)
                if v is not None:
                    _check_finite(name, torch.tensor(v), it)
            total.backward()
            self.opt_g.step()
        finally:
            for d in (self.app_disc, self.mot_disc):
                d.requires_grad_(True)
        self.g_steps += 1
        return rec

    def _discriminator_step(self, it: int, role: str) -> LossBreakdown:
        batch = self._batch(role)
        with torch.no_grad():
            fake = self.generator(batch["clip"], batch["template"])
        if role == DA_STEP:
            disc, opt, terms, name = self.app_disc, self.opt_da, appearance_adversarial_terms, "app_adv"
        else:
            disc, opt, terms, name = self.mot_disc, self.opt_dm, motion_adversarial_terms, "mot_adv"
        opt.zero_grad(set_to_none=True)
        d_loss, _ = terms(batch, self.generator, disc, fake, self.cfg.adversarial_form)
        _check_finite(name, d_loss, it)
        if not self.cfg.freeze_discriminators:
            d_loss.backward()
            opt.step()
        value = d_loss.item()
        rec = LossBreakdown(it, role, total=value)
        setattr(rec, name, value)
        return rec

    def step(self) -> LossBreakdown:
        it = self.iteration
        role = self.role(it)
        rec = self._generator_step(it) if role == G_STEP else self._discriminator_step(it, role)
        self.log.append(rec)
        self.iteration += 1
        return rec

    def run(self, max_iters: Optional[int] = None,
            callback: Optional[Callable[["Trainer", LossBreakdown], bool]] = None,
            checkpoint_dir: Optional[Path] = None, run_config: Optional[dict] = None) -> list[LossBreakdown]:
        """Iterate until ``max_iters`` total iterations; ``callback`` returning True stops early."""
        max_iters = self.cfg.max_iters if max_iters is None else max_iters
        while self.iteration < max_iters:
            rec = self.step()
            every = self.cfg.checkpoint_every
            if checkpoint_dir is not None and every and self.iteration % every == 0:
                self.save(Path(checkpoint_dir) / f"ckpt_{self.iteration:06d}.pt", run_config)
            if callback is not None and callback(self, rec):
                break
        return self.log

    # -- persistence
    def state(self) -> dict:
        return {
            "iteration": self.iteration,
            "g_steps": self.g_steps,
            "config": self.cfg.to_dict(),
            "optimizers": {"G": self.opt_g.state_dict(), "Da": self.opt_da.state_dict(),
                           "Dm": self.opt_dm.state_dict()},
            "rng": {role: rng.bit_generator.state for role, rng in self.rngs.items()},
            "log": [asdict(r) for r in self.log],
        }

    def load_state(self, state: dict) -> None:
        self.iteration = int(state["iteration"])
        self.g_steps = int(state["g_steps"])
        self.opt_g.load_state_dict(state["optimizers"]["G"])
        self.opt_da.load_state_dict(state["optimizers"]["Da"])
        self.opt_dm.load_state_dict(state["optimizers"]["Dm"])
        for role, st in state["rng"].items():
            self.rngs[role].bit_generator.state = st
        self.log = [LossBreakdown(**r) for r in state["log"]]

    def save(self, path: Path, run_config: Optional[dict] = None) -> Path:
        from .checkpoint import save_checkpoint

        return save_checkpoint(path, self.generator, self.app_disc, self.mot_disc,
                               training=self.state(), run_config=run_config)


@dataclass
class TrainResult:
    generator: AttentionGenerator
    app_disc: AppearanceDiscriminator
    mot_disc: MotionDiscriminator
    log: list[LossBreakdown] = field(default_factory=list)


def build_networks(gen_cfg: GeneratorConfig, disc_cfg: DiscriminatorConfig, seed: int):
    return (AttentionGenerator(gen_cfg, seed=seed),
            AppearanceDiscriminator(disc_cfg, seed=seed + 1),
            MotionDiscriminator(disc_cfg, seed=seed + 2))


def train(dataset: ClipDataset, cfg: TrainingConfig, gen_cfg: Optional[GeneratorConfig] = None,
          disc_cfg: Optional[DiscriminatorConfig] = None, callback=None,
          checkpoint_dir: Optional[Path] = None, log_path: Optional[Path] = None) -> TrainResult:
    """Train from scratch on ``dataset``; networks are initialised from ``cfg.seed``."""
    gen_cfg = gen_cfg or GeneratorConfig.tiny(R=dataset.R, L=dataset.L, template_size=dataset.template_size)
    disc_cfg = disc_cfg or DiscriminatorConfig.tiny(input_size=dataset.R, L=dataset.L)
    trainer = Trainer(dataset, cfg, *build_networks(gen_cfg, disc_cfg, cfg.seed))
    trainer.run(callback=callback, checkpoint_dir=checkpoint_dir)
    if log_path is not None:
        write_loss_log(log_path, trainer.log)
    return TrainResult(trainer.generator, trainer.app_disc, trainer.mot_disc, trainer.log)


# ---------------------------------------------------------------- loss log

LOG_COLUMNS = ("iter", "role", "bce", "app", "mot", "total")


def _fmt(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


def write_loss_log(path: str | Path, records: Iterable[LossBreakdown]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_COLUMNS)
        for r in records:
            w.writerow([r.iter, r.role, _fmt(r.bce), _fmt(r.app_adv), _fmt(r.mot_adv), _fmt(r.total)])


def read_loss_log(path: str | Path) -> list[LossBreakdown]:
    parse = lambda s: None if s == "" else float(s)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [LossBreakdown(int(r["iter"]), r["role"], parse(r["bce"]), parse(r["app"]),
                          parse(r["mot"]), parse(r["total"])) for r in rows]
