"""Run configuration and its plain ``key=value`` file format.

One setting per line as ``section.field=value`` (``mix.n_group=4``), nested
models continue the dotted path (``data.skeleton.thickness=2.0``). Tuples are
comma separated; pairs inside a tuple use ``:`` (``2:3,4:5``). ``#`` starts a
comment. Unknown keys are rejected.
"""

import os
from enum import Enum
from pathlib import Path
from typing import Any

from loguru import logger
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from mumkit.data.types import DataConfig
from mumkit.errors import ConfigurationError
from mumkit.mixing.types import MixSpec
from mumkit.model.config import PoseNetConfig
from mumkit.training.config import TrainConfig

SEED_ENV_VAR = "MUMKIT_SEED"


class RunConfig(BaseModel):
    """Everything one run needs, grouped by concern."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    data: DataConfig = DataConfig()
    mix: MixSpec = MixSpec()
    model: PoseNetConfig = PoseNetConfig()
    train: TrainConfig = TrainConfig()

    @model_validator(mode="after")
    def _sections_agree(self) -> "RunConfig":
        if tuple(self.model.input_size) != tuple(self.data.image_size):
            raise ValueError(
                f"model.input_size {self.model.input_size} != data.image_size {self.data.image_size}"
            )
        if tuple(self.model.heatmap_size) != tuple(self.data.heatmap_size):
            raise ValueError(
                f"model.heatmap_size {self.model.heatmap_size} != "
                f"data.heatmap_size {self.data.heatmap_size}"
            )
        if self.model.n_keypoints != self.data.skeleton.n_keypoints:
            raise ValueError(
                f"model.n_keypoints {self.model.n_keypoints} != "
                f"data.skeleton.n_keypoints {self.data.skeleton.n_keypoints}"
            )
        if self.train.cutout_joints > self.model.n_keypoints:
            raise ValueError(
                f"train.cutout_joints {self.train.cutout_joints} exceeds "
                f"model.n_keypoints {self.model.n_keypoints}"
            )
        self.model.check_mix_divisibility(self.mix)
        return self


def _format_scalar(value: Any) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _format_value(value: Any) -> str:
    if isinstance(value, tuple):
        return ",".join(
            ":".join(_format_scalar(v) for v in item) if isinstance(item, tuple) else _format_scalar(item)
            for item in value
        )
    return _format_scalar(value)


def _flatten(model: BaseModel, prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for name in type(model).model_fields:
        value = getattr(model, name)
        key = f"{prefix}{name}"
        if isinstance(value, BaseModel):
            flat.update(_flatten(value, key + "."))
        else:
            flat[key] = value
    return flat


def dump_run_config(cfg: RunConfig) -> str:
    """Every field in declaration order; the output loads back to ``cfg``."""
    lines = [f"{key}={_format_value(value)}" for key, value in _flatten(cfg).items()]
    return "\n".join(lines) + "\n"


def _parse_value(raw: str, default: Any) -> Any:
    if not isinstance(default, tuple):
        return raw
    if raw == "":
        return ()
    items = [item.strip() for item in raw.split(",")]
    return tuple(tuple(part.strip() for part in item.split(":")) if ":" in item else item for item in items)


def _set_nested(tree: dict[str, Any], key: str, value: Any) -> None:
    *path, leaf = key.split(".")
    node = tree
    for part in path:
        node = node.setdefault(part, {})
    node[leaf] = value


def _validate(tree: dict[str, Any], source: str) -> RunConfig:
    try:
        return RunConfig.model_validate(tree)
    except ValidationError as exc:
        errors = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()
        )
        logger.error(f"Invalid configuration in {source}: {errors}")
        raise ConfigurationError(f"{source}: {errors}") from exc


def parse_run_config(text: str, source: str = "<text>") -> RunConfig:
    """Parse ``key=value`` text on top of the defaults.

    Raises:
        ConfigurationError: malformed line, unknown or duplicate key, or a
            value that fails validation (the message names the field)
    """
    defaults = _flatten(RunConfig())
    tree: dict[str, Any] = {}
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in defaults:
            logger.error(f"Unknown configuration key {key!r} in {source}:{lineno}")
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        _set_nested(tree, key, _parse_value(raw, defaults[key]))
    return _validate(tree, source)


def load_run_config(config_path: str | Path) -> RunConfig:
    logger.info(f"Loading run configuration from {config_path}")
    cfg = parse_run_config(Path(config_path).read_text(encoding="utf-8"), str(config_path))
    logger.info("Run configuration loaded successfully")
    return cfg


def override(cfg: RunConfig, updates: dict[str, Any]) -> RunConfig:
    """Copy of ``cfg`` with dotted keys replaced, validated as a whole."""
    known = _flatten(cfg)
    tree = cfg.model_dump()
    for key, value in updates.items():
        if key not in known:
            raise ConfigurationError(f"unknown key {key!r}")
        _set_nested(tree, key, value)
    return _validate(tree, "<override>")


def apply_env_overrides(cfg: RunConfig) -> RunConfig:
    """``MUMKIT_SEED`` replaces both the training and the data seed when set."""
    raw = os.getenv(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return cfg
    try:
        seed = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc
    logger.info(f"{SEED_ENV_VAR}={seed} overrides the configured seeds")
    return override(cfg, {"train.seed": seed, "data.seed": seed})


def describe_defaults() -> str:
    """Default configuration, for ``--help``."""
    return dump_run_config(RunConfig())
