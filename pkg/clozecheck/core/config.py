"""Run configuration: pydantic models, file loading and dotted overrides."""

import hashlib
import json
from pathlib import Path
from typing import Any
from typing import Literal

import yaml
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import ValidationError
from pydantic import model_validator

from clozecheck.core.vocab import SYNTHETIC_ALPHABET
from clozecheck.exceptions import ConfigError


PLATFORM_ERROR_RATIO = 100 / 673


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometryConfig(Section):
    """Image geometry. ``max_width / block_width`` is the visual sequence length."""

    img_height: int = 32
    block_width: int = 8
    max_width: int = 256
    base_char_width: int = 16
    char_gap: int = 2

    @model_validator(mode="after")
    def check_blocks(self) -> "GeometryConfig":
        bw = self.block_width
        if bw < 1 or bw & (bw - 1):
            msg = f"block_width must be a power of two, got {bw}"
            raise ValueError(msg)
        if self.max_width % bw:
            msg = f"max_width {self.max_width} is not divisible by block_width {bw}"
            raise ValueError(msg)
        if self.img_height < 8:
            msg = f"img_height must be at least 8, got {self.img_height}"
            raise ValueError(msg)
        return self

    @property
    def num_blocks(self) -> int:
        return self.max_width // self.block_width


class ModelConfig(Section):
    """Backbone and fusion model dimensions."""

    conv_blocks: list[int] = Field(default_factory=lambda: [1, 1, 1, 1])
    channels: list[int] = Field(default_factory=lambda: [16, 32, 64, 64])
    hidden_size: int = 64
    embed_dim: int = 32
    dim: int = 64
    heads: int = 4
    ffn_dim: int = 128
    n_enc: int = Field(default=2, ge=0)
    n_fus: int = Field(default=2, ge=1)
    text_self_attn: bool = True
    text_self_attn_placement: Literal["per_block", "once"] = "per_block"
    max_answer_len: int = 16
    dropout: float = Field(default=0.1, ge=0.0, lt=1.0)
    conv_dropout: float = Field(default=0.3, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def check_dims(self) -> "ModelConfig":
        if len(self.conv_blocks) != len(self.channels):
            msg = "conv_blocks and channels must have the same number of stages"
            raise ValueError(msg)
        if min(self.conv_blocks, default=0) < 1:
            msg = f"every stage needs at least one residual unit, got {self.conv_blocks}"
            raise ValueError(msg)
        if self.channels[-1] != self.hidden_size:
            msg = f"last stage channels {self.channels[-1]} must equal hidden_size {self.hidden_size}"
            raise ValueError(msg)
        if self.dim % self.heads:
            msg = f"dim {self.dim} is not divisible by heads {self.heads}"
            raise ValueError(msg)
        if self.max_answer_len < 1:
            msg = "max_answer_len must leave room for <BLK>"
            raise ValueError(msg)
        return self


class TrainConfig(Section):
    """Optimizer and schedule settings for both training stages."""

    lr_pretrain: float = 1e-3
    epochs_pretrain: int = 15
    lr_mac: float = 1e-4
    epochs_mac: int = 14
    batch_size: int = 8
    weight_decay: float = 1e-4
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    pretrain: bool = True
    ocr_checkpoint: str | None = None
    eval_workers: int = Field(default=1, ge=1)


class AugmentConfig(Section):
    """Negative sample augmentation; each family runs uniform[1, max] rounds.

    The default max of 1 per family gives one negative of each kind per
    original, the ≈4x expansion; raise the maxima to 3 for uniform[1, 3].
    """

    max_sub_rounds: int = Field(default=1, ge=0)
    max_del_rounds: int = Field(default=1, ge=0)
    max_ins_rounds: int = Field(default=1, ge=0)
    seed: int | None = None

    @property
    def generates_negatives(self) -> bool:
        return max(self.max_sub_rounds, self.max_del_rounds, self.max_ins_rounds) > 0


class ShardConfig(Section):
    """How the original (pre-augmentation) samples of one shard are drawn."""

    count: int = Field(ge=0)
    ligature_prob: float = Field(default=0.2, ge=0.0, le=1.0)
    sloppy_prob: float = Field(default=0.3, ge=0.0, le=1.0)
    error_ratio: float = Field(default=0.0, ge=0.0, le=1.0)
    max_shift: int = Field(default=1, ge=0)
    max_thickness: int = Field(default=0, ge=0)
    width_scale: tuple[float, float] = (0.85, 1.15)

    @model_validator(mode="after")
    def check_scale(self) -> "ShardConfig":
        low, high = self.width_scale
        if not 0.7 <= low <= high <= 1.4:
            msg = f"width_scale range {self.width_scale} must lie inside [0.7, 1.4]"
            raise ValueError(msg)
        return self


def _default_shards() -> dict[str, ShardConfig]:
    return {
        "synthetic": ShardConfig(count=250, ligature_prob=0.1),
        "handwriting": ShardConfig(
            count=150, ligature_prob=0.3, max_shift=2, max_thickness=1, width_scale=(0.75, 1.3)
        ),
        "platform": ShardConfig(count=100, error_ratio=PLATFORM_ERROR_RATIO),
    }


class DataConfig(Section):
    """Synthetic corpus composition."""

    dir: str | None = None
    vocab_size: int = 64
    vocab_path: str | None = None
    confusion_path: str | None = None
    family_size: int = Field(default=4, ge=2)
    strip_chars: str = ""
    min_answer_len: int = Field(default=2, ge=1)
    max_answer_len: int = Field(default=8, ge=1)
    shards: dict[str, ShardConfig] = Field(default_factory=_default_shards)
    dev: ShardConfig = Field(
        default_factory=lambda: ShardConfig(count=100, error_ratio=PLATFORM_ERROR_RATIO)
    )
    test: ShardConfig = Field(
        default_factory=lambda: ShardConfig(count=400, error_ratio=PLATFORM_ERROR_RATIO)
    )
    error_mix: dict[Literal["sub", "del", "ins"], float] = Field(
        default_factory=lambda: {"sub": 0.5, "del": 0.25, "ins": 0.25}
    )
    exclude_shards: list[str] = Field(default_factory=list)
    workers: int = Field(default=1, ge=1)
    max_render_attempts: int = Field(default=16, ge=1)

    @model_validator(mode="after")
    def check_lengths(self) -> "DataConfig":
        if self.min_answer_len > self.max_answer_len:
            msg = "min_answer_len must not exceed max_answer_len"
            raise ValueError(msg)
        if any(w < 0 for w in self.error_mix.values()) or sum(self.error_mix.values()) <= 0:
            msg = f"error_mix weights must be non-negative with a positive sum, got {self.error_mix}"
            raise ValueError(msg)
        unknown = set(self.exclude_shards) - set(self.shards)
        if unknown:
            msg = f"exclude_shards names unknown shards: {sorted(unknown)}"
            raise ValueError(msg)
        if self.vocab_path is None:
            kept = set(SYNTHETIC_ALPHABET[: self.vocab_size]) - set(self.strip_chars)
            if len(kept) < 2:
                msg = f"strip_chars {self.strip_chars!r} must leave at least two characters"
                raise ValueError(msg)
        return self


class RunConfig(Section):
    """Complete experiment configuration."""

    seed: int = 42
    run_dir: str = "runs/default"
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)
    data: DataConfig = Field(default_factory=DataConfig)

    @model_validator(mode="after")
    def check_answer_fits(self) -> "RunConfig":
        # longest answer after one insertion, plus <BLK>
        if self.data.max_answer_len + 2 > self.model.max_answer_len:
            msg = (
                f"model.max_answer_len {self.model.max_answer_len} cannot hold answers of "
                f"length {self.data.max_answer_len} plus one insertion and <BLK>"
            )
            raise ValueError(msg)
        return self

    @property
    def path(self) -> Path:
        return Path(self.run_dir)

    def config_hash(self) -> str:
        """SHA-256 over geometry and model sections (what a checkpoint depends on)."""
        payload = {
            "geometry": self.geometry.model_dump(mode="json"),
            "model": self.model.model_dump(mode="json"),
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def snapshot(self, path: Path) -> None:
        """Write the effective configuration as YAML."""
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False))


def read_config_file(path: Path) -> dict[str, Any]:
    """Load a YAML or JSON mapping, detected by suffix and then by content."""
    if not path.exists():
        msg = f"Config file not found: {path}"
        raise ConfigError(msg)

    content = path.read_text()
    if path.suffix == ".json":
        data = json.loads(content)
    elif path.suffix in (".yaml", ".yml"):
        data = yaml.safe_load(content)
    else:
        try:
            data = json.loads(content)
        except json.JSONDecodeError:
            data = yaml.safe_load(content)

    if data is None:
        return {}
    if not isinstance(data, dict):
        msg = f"Config file {path} must contain a mapping"
        raise ConfigError(msg)
    return data


def apply_override(data: dict[str, Any], assignment: str) -> None:
    """Apply one ``section.key=value`` override in place.

    The value is parsed as a YAML scalar or flow collection, so ``3``,
    ``0.5``, ``false`` and ``[1, 2]`` get their natural types.

    Example:
        >>> data = {}
        >>> apply_override(data, "train.batch_size=4")
        >>> data
        {'train': {'batch_size': 4}}
    """
    if "=" not in assignment:
        msg = f"Override {assignment!r} must look like section.key=value"
        raise ConfigError(msg)
    dotted, raw = assignment.split("=", 1)
    keys = [k for k in dotted.strip().split(".") if k]
    if not keys:
        msg = f"Override {assignment!r} has an empty key"
        raise ConfigError(msg)

    node = data
    for key in keys[:-1]:
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            msg = f"Override {assignment!r}: {key} is not a section"
            raise ConfigError(msg)
        node = child
    node[keys[-1]] = yaml.safe_load(raw) if raw.strip() else ""


def load_config(
    path: str | Path | None = None,
    overrides: list[str] | tuple[str, ...] = (),
    flags: dict[str, Any] | None = None,
) -> RunConfig:
    """Build a RunConfig from an optional file, dotted overrides and flags.

    Precedence: flags > overrides > file > defaults. ``flags`` maps dotted
    keys to values; entries whose value is None are ignored.

    Raises:
        ConfigError: If the file cannot be read or validation fails.
    """
    data = read_config_file(Path(path)) if path else {}
    for assignment in overrides:
        apply_override(data, assignment)
    for key, value in (flags or {}).items():
        if value is not None:
            apply_override(data, f"{key}={json.dumps(value)}")

    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        msg = f"Invalid configuration: {e}"
        raise ConfigError(msg) from e
