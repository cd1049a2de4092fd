"""Self-describing checkpoint container for the generator and both discriminators."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import torch

from .discriminators import AppearanceDiscriminator, DiscriminatorConfig, MotionDiscriminator
from .errors import CheckpointError
from .generator import AttentionGenerator, GeneratorConfig

FORMAT = "tanet-checkpoint"
VERSION = 1

_SECTIONS = {
    "generator": (AttentionGenerator, GeneratorConfig),
    "appearance_discriminator": (AppearanceDiscriminator, DiscriminatorConfig),
    "motion_discriminator": (MotionDiscriminator, DiscriminatorConfig),
}


def _section(module) -> dict:
    return {
        "config": module.config.to_dict(),
        "init_seed": module.init_seed,
        "weights": {k: v.detach().clone() for k, v in module.state_dict().items()},
    }


def save_checkpoint(path: str | Path, generator: AttentionGenerator,
                    app_disc: AppearanceDiscriminator | None = None,
                    mot_disc: MotionDiscriminator | None = None,
                    training: dict[str, Any] | None = None,
                    run_config: dict[str, Any] | None = None) -> Path:
    """Write networks (plus optional trainer state and the run's config echo)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload: dict[str, Any] = {"format": FORMAT, "version": VERSION, "generator": _section(generator)}
    if app_disc is not None:
        payload["appearance_discriminator"] = _section(app_disc)
    if mot_disc is not None:
        payload["motion_discriminator"] = _section(mot_disc)
    if training is not None:
        payload["training"] = training
    if run_config is not None:
        payload["run_config"] = dict(run_config)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)
    return path


def read_checkpoint(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:  # corrupt or foreign file
        raise CheckpointError(f"{path}: not a readable checkpoint ({exc})") from exc
    if not isinstance(payload, dict) or payload.get("format") != FORMAT:
        raise CheckpointError(f"{path}: not a {FORMAT} file")
    if payload.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    return payload


def build_section(payload: dict, name: str, expected_config=None, dtype=torch.float32):
    if name not in payload:
        raise CheckpointError(f"checkpoint has no {name!r} section")
    cls, cfg_cls = _SECTIONS[name]
    sec = payload[name]
    cfg = cfg_cls.from_dict(sec["config"])
    if expected_config is not None and expected_config != cfg:
        raise CheckpointError(f"{name} config mismatch: checkpoint has {cfg}, expected {expected_config}")
    module = cls(cfg, seed=sec["init_seed"]).to(dtype)
    try:
        module.load_state_dict(sec["weights"])
    except RuntimeError as exc:
        raise CheckpointError(f"{name} weights do not fit the recorded config: {exc}") from exc
    return module


def load_checkpoint(path: str | Path, generator_config: GeneratorConfig | None = None,
                    discriminator_config: DiscriminatorConfig | None = None):
    """Return ``(generator, app_disc | None, mot_disc | None, payload)``."""
    payload = read_checkpoint(path)
    gen = build_section(payload, "generator", generator_config)
    dims = [build_section(payload, n, discriminator_config) if n in payload else None
            for n in ("appearance_discriminator", "motion_discriminator")]
    return gen, dims[0], dims[1], payload


def load_generator(path: str | Path, expected_config: GeneratorConfig | None = None) -> AttentionGenerator:
    return build_section(read_checkpoint(path), "generator", expected_config)
