"""Flat key=value run configuration: parse, validate, serialize.

One text file maps every training, dataset and evaluation knob. Unknown
keys are rejected, and ``parse_config(serialize_config(c)) == c`` holds
exactly, so the config echo a run writes is sufficient to reproduce it.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .augment import AugmentPolicy, policy_by_name
from .errors import ConfigError
from .losses import LossConfig
from .nn import MlpSpec
from .train import TrainConfig


@dataclass
class RunConfig:
    # objective
    objective: str = "isd"               # isd | moco | byol
    temperature: float = 0.02
    # model / optimizer
    momentum: float = 0.99
    bank_capacity: int = 1024
    batch_size: int = 64
    epochs: int = 200
    lr: float = 0.01
    lr_schedule: str = "step"            # step | cosine
    lr_step_fracs: tuple[float, ...] = (0.7, 0.9)
    lr_step_factor: float = 0.2
    sgd_momentum: float = 0.9
    weight_decay: float = 1e-4
    encoder_widths: tuple[int, ...] = () # empty: [dim, 256, 128, 64]
    predictor_hidden: int = 64
    # augmentation (policy names; "custom" reads the custom_* fields)
    teacher_policy: str = "aggressive"
    student_policy: str = "aggressive"
    custom_noise_std: float = 0.25
    custom_mask_prob: float = 0.2
    custom_scale_min: float = 0.5
    custom_scale_max: float = 1.5
    custom_rotation_range: float = 0.0
    custom_crop_min: float = 0.6
    custom_crop_max: float = 1.0
    custom_flip_prob: float = 0.5
    # seeds
    seed_init: int = 0
    seed_data: int = 1
    seed_augment: int = 2
    # modes
    distill_mode: bool = False
    distill_source: str = "teacher"      # which network of a loaded checkpoint
    # evaluation
    eval_every: int = 10
    eval_k: int = 5
    probe_epochs: int = 200
    probe_lr: float = 1.0
    recall_ks: tuple[int, ...] = (1, 2, 4, 8)
    # data: explicit container paths, or synthetic generation parameters
    data_train: str = ""
    data_eval: str = ""
    data_classes: int = 3
    data_per_class: int = 200
    data_eval_per_class: int = 50
    data_dim: int = 32
    data_sep: float = 6.0
    data_seed: int = 7


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _parse_value(name: str, text: str):
    f = _FIELDS[name]
    base = f.type
    try:
        if base == "bool":
            low = text.strip().lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if base == "int":
            return int(text)
        if base == "float":
            return float(text)
        if base == "str":
            return text
        if base.startswith("tuple[int"):
            return tuple(int(p) for p in text.split(",") if p.strip() != "")
        if base.startswith("tuple[float"):
            return tuple(float(p) for p in text.split(",") if p.strip() != "")
    except ValueError as e:
        raise ConfigError(f"config key {name}: {e}") from e
    raise ConfigError(f"config key {name}: unhandled field type {base}")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> RunConfig:
    """Parse key=value lines ('#' starts a comment); unknown keys are rejected."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"config line {lineno}: expected key=value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw.strip())
    return RunConfig(**values)


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as f:
            text = f.read()
    except OSError:
        raise ConfigError(f"config not found: {path}")
    return parse_config(text)


def serialize_config(cfg: RunConfig) -> str:
    lines = [f"{f.name}={_format_value(getattr(cfg, f.name))}" for f in fields(RunConfig)]
    return "\n".join(lines) + "\n"


def apply_overrides(cfg: RunConfig, pairs: list[str]) -> RunConfig:
    """Apply --set key=value overrides on top of a parsed config."""
    updates = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must look like key=value, got {pair!r}")
        key, _, raw = pair.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        updates[key] = _parse_value(key, raw.strip())
    return replace(cfg, **updates)


def _policy(cfg: RunConfig, name: str) -> AugmentPolicy:
    custom = AugmentPolicy(
        name="custom",
        noise_std=cfg.custom_noise_std,
        mask_prob=cfg.custom_mask_prob,
        scale_range=(cfg.custom_scale_min, cfg.custom_scale_max),
        rotation_range=cfg.custom_rotation_range,
        crop_range=(cfg.custom_crop_min, cfg.custom_crop_max),
        flip_prob=cfg.custom_flip_prob,
    )
    return policy_by_name(name, custom=custom)


def to_train_config(cfg: RunConfig) -> TrainConfig:
    """Build the structured training config from the flat run config."""
    encoder_spec = None
    if cfg.encoder_widths:
        encoder_spec = MlpSpec(cfg.encoder_widths, final_normalize=True)
    return TrainConfig(
        objective=LossConfig(cfg.objective, cfg.temperature),
        momentum=cfg.momentum,
        bank_capacity=cfg.bank_capacity,
        batch_size=cfg.batch_size,
        epochs=cfg.epochs,
        lr=cfg.lr,
        lr_schedule=cfg.lr_schedule,
        lr_step_fracs=cfg.lr_step_fracs,
        lr_step_factor=cfg.lr_step_factor,
        sgd_momentum=cfg.sgd_momentum,
        weight_decay=cfg.weight_decay,
        encoder_spec=encoder_spec,
        predictor_hidden=cfg.predictor_hidden,
        teacher_policy=_policy(cfg, cfg.teacher_policy),
        student_policy=_policy(cfg, cfg.student_policy),
        seed_init=cfg.seed_init,
        seed_data=cfg.seed_data,
        seed_augment=cfg.seed_augment,
        distill_mode=cfg.distill_mode,
        eval_every=cfg.eval_every,
        eval_k=cfg.eval_k,
    )
