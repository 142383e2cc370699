"""Run configuration: defaults, a flat key=value config-file format, and
CLI/service override merging.

Every hyperparameter has a documented default; config files are plain
``key = value`` lines (lists comma-separated, ``#`` comments allowed), and
any explicit CLI flag or request field overrides the file value.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, field_validator

from .localizer import DEFAULT_WIDTHS


class RunConfig(BaseModel):
    """Model, graph, and training hyperparameters for one run."""

    seed: int = 0

    # model dimensions
    model_dim: int = 256
    word_dim: int = 300
    lang_hidden: int = 128
    frame_hidden: int = 128
    word_embed_seed: int = 1234

    # graph reasoning
    layers: int = 2                      # stacked reasoning layers
    window: int = 5                      # temporal link window M
    epsilon: float = 0.8                 # temporal link IoU weight
    relation_mode: Literal["annotated", "geometric_stub"] = "annotated"
    use_implicit: bool = True
    use_explicit: bool = True
    use_temporal: bool = True
    query_mode: Literal["entity_attention", "last_hidden"] = "entity_attention"
    tagger: Literal["lexicon"] = "lexicon"  # noun tagging backend; custom taggers go through the API

    # localizer
    widths: list[int] = Field(default_factory=lambda: list(DEFAULT_WIDTHS))
    lambda_align: float = 1.0
    lambda_reg: float = 0.001
    lambda_exp: float = 1.0

    # decoding
    theta: float = 0.2                   # tube-linking IoU weight
    decode: Literal["greedy", "dynamic"] = "dynamic"

    # training
    learning_rate: float = 0.001
    batch_size: int = 16
    epochs: int = 30
    grad_clip: float = 5.0
    precision: Literal["float32", "float64"] = "float32"
    eval_every: int = 0                  # 0 disables periodic training-set evaluation
    stop_m_tiou: float | None = None     # early-stop thresholds, both must be met
    stop_m_viou: float | None = None

    @field_validator("model_dim", "word_dim", "lang_hidden", "frame_hidden", "layers", "window", "batch_size", "epochs")
    @classmethod
    def _positive(cls, v: int, info) -> int:
        if v < 1:
            raise ValueError(f"{info.field_name} must be positive")
        return v

    @field_validator("learning_rate", "epsilon", "theta")
    @classmethod
    def _positive_float(cls, v: float, info) -> float:
        if v <= 0:
            raise ValueError(f"{info.field_name} must be positive")
        return v

    @field_validator("lambda_align", "lambda_reg", "lambda_exp", "grad_clip")
    @classmethod
    def _non_negative(cls, v: float, info) -> float:
        if v < 0:
            raise ValueError(f"{info.field_name} must be non-negative")
        return v

    @field_validator("widths")
    @classmethod
    def _ascending_widths(cls, v: list[int]) -> list[int]:
        if not v:
            raise ValueError("widths must be non-empty")
        if any(w < 1 for w in v):
            raise ValueError("widths must be positive")
        if sorted(v) != v or len(set(v)) != len(v):
            raise ValueError("widths must be strictly ascending")
        return v

    @property
    def loss_weights(self) -> tuple[float, float, float]:
        return (self.lambda_align, self.lambda_reg, self.lambda_exp)


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read flat ``key = value`` lines; blank lines and ``#`` comments skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# Config-file spellings accepted for the three loss weights.
_KEY_ALIASES = {"lambda1": "lambda_align", "lambda2": "lambda_reg", "lambda3": "lambda_exp"}


def _coerce(values: dict[str, str]) -> dict[str, object]:
    coerced: dict[str, object] = {}
    for key, value in values.items():
        key = _KEY_ALIASES.get(key, key)
        if key == "widths":
            coerced[key] = [int(v) for v in value.split(",") if v.strip()]
        elif value.lower() in ("true", "false"):
            coerced[key] = value.lower() == "true"
        elif value.lower() in ("none", "null"):
            coerced[key] = None
        else:
            coerced[key] = value
    return coerced


def load_run_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional file plus explicit overrides
    (overrides win; ``None`` override values are ignored)."""
    values: dict[str, object] = {}
    if path is not None:
        values.update(_coerce(parse_config_file(path)))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return RunConfig(**values)
