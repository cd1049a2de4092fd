"""Flat ``key = value`` run configuration shared by every CLI command."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional

from .discriminators import DiscriminatorConfig
from .generator import GeneratorConfig
from .synthetic import SyntheticSceneConfig
from .tracking import TrackerConfig
from .training import TrainingConfig

ECHO_FILE = "run_config.txt"


@dataclass(frozen=True)
class RunConfig:
    # generator / discriminators
    scale: str = "tiny"
    resolution: int = 64
    clip_length: int = 3
    template_size: int = 32
    disc_input_size: int = 0  # 0: same as resolution
    # training
    lambda1: float = 0.2
    lambda2: float = 0.1
    n1: int = 5
    n2: int = 3
    batch_size: int = 4
    lr_g: float = 3e-3
    lr_da: float = 1e-3
    lr_dm: float = 1e-3
    max_iters: int = 300
    checkpoint_every: int = 0
    num_clips: int = 0  # 0: every frame of every sequence
    bce_form: str = "two-sided"
    adversarial_form: str = "saturating"
    schedule: str = "alternating"
    # tracking
    beta1: float = 0.8
    beta2: float = 5.0
    k_local: float = 2.0
    k_global: float = 4.0
    tau: float = 0.5
    local_only: bool = False
    # synthetic data
    num_sequences: int = 5
    frame_size: int = 64
    num_frames: int = 30
    target_shape: str = "square"
    target_size: int = 12
    motion: str = "linear"
    speed: float = 2.0
    occlusion: str = ""  # "start-end;start-end", end exclusive
    distractors: int = 0
    noise_sigma: float = 0.02
    # runtime
    seed: int = 0
    workers: int = 1

    # -- parsing
    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def coerce(cls, key: str, raw: Any) -> Any:
        types = {f.name: type(f.default) for f in fields(cls)}
        if key not in types:
            raise KeyError(f"unknown config key {key!r}")
        kind = types[key]
        if not isinstance(raw, str):
            return kind(raw)
        raw = raw.strip()
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"{key}: expected a boolean, got {raw!r}")
        if kind is float and raw.lower() in ("inf", "infinity"):
            return math.inf
        return kind(raw)

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> dict[str, Any]:
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{source}:{lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in line.split("=", 1))
            try:
                values[key] = cls.coerce(key, raw)
            except KeyError as exc:
                raise ValueError(f"{source}:{lineno}: {exc.args[0]}") from None
        return values

    @classmethod
    def resolve(cls, path: Optional[str | Path] = None, overrides: Optional[dict[str, Any]] = None) -> "RunConfig":
        values = {}
        if path is not None:
            values.update(cls.parse(Path(path).read_text(), str(path)))
        for k, v in (overrides or {}).items():
            if v is not None:
                values[k] = cls.coerce(k, v)
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def to_text(self) -> str:
        out = []
        for k, v in asdict(self).items():
            out.append(f"{k} = {str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(out) + "\n"

    def echo(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / ECHO_FILE).write_text(self.to_text())
        return out / ECHO_FILE

    def validate(self) -> None:
        # building every section surfaces range errors early
        self.generator_config()
        self.discriminator_config()
        self.training_config()
        self.tracker_config()
        self.scene_config()
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.num_clips < 0 or self.num_sequences < 1:
            raise ValueError("num_clips must be >= 0 and num_sequences >= 1")

    # -- sections
    def generator_config(self) -> GeneratorConfig:
        kw = dict(R=self.resolution, L=self.clip_length, template_size=self.template_size)
        if self.scale == "tiny":
            return GeneratorConfig.tiny(**kw)
        if self.scale == "faithful":
            return GeneratorConfig.faithful(**kw)
        raise ValueError(f"scale must be 'tiny' or 'faithful', got {self.scale!r}")

    def discriminator_config(self) -> DiscriminatorConfig:
        size = self.disc_input_size or self.resolution
        if self.scale == "tiny":
            return DiscriminatorConfig.tiny(input_size=size, L=self.clip_length)
        return DiscriminatorConfig.faithful(input_size=size, L=self.clip_length)

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(
            lambda1=self.lambda1, lambda2=self.lambda2, n1=self.n1, n2=self.n2, batch_size=self.batch_size,
            lr_g=self.lr_g, lr_da=self.lr_da, lr_dm=self.lr_dm, max_iters=self.max_iters, seed=self.seed,
            checkpoint_every=self.checkpoint_every, bce_form=self.bce_form,
            adversarial_form=self.adversarial_form, schedule=self.schedule)

    def tracker_config(self) -> TrackerConfig:
        return TrackerConfig(beta1=self.beta1, beta2=self.beta2, k_local=self.k_local,
                             k_global=self.k_global, tau=self.tau, local_only=self.local_only)

    def occlusion_windows(self) -> tuple[tuple[int, int], ...]:
        windows = []
        for part in filter(None, (p.strip() for p in self.occlusion.split(";"))):
            try:
                a, b = (int(v) for v in part.split("-"))
            except ValueError:
                raise ValueError(f"occlusion window {part!r} is not 'start-end'") from None
            windows.append((a, b))
        return tuple(windows)

    def scene_config(self, seed: Optional[int] = None) -> SyntheticSceneConfig:
        return SyntheticSceneConfig(
            frame_size=self.frame_size, num_frames=self.num_frames, target_shape=self.target_shape,
            target_size=self.target_size, motion=self.motion, speed=self.speed,
            occlusion_windows=self.occlusion_windows(), distractors=self.distractors,
            noise_sigma=self.noise_sigma, seed=self.seed if seed is None else seed)

    def with_overrides(self, **kw) -> "RunConfig":
        cfg = replace(self, **kw)
        cfg.validate()
        return cfg
