"""
Run Configuration File
Flat `key = value` text routed by prefix to the typed configuration models

Keys:
    preset            desk | studio, base for every model.* key
    model.<field>     ModelConfig
    train.<field>     TrainConfig
    data.<field>      DataConfig
    corpus.<field>    CorpusSpec (used when data.synthetic is true)
    output.<field>    OutputConfig

Lists are written `4, 4, 2` or `[4, 4, 2]`; `none` clears an optional key.
"""

import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union, get_args, get_origin

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from core.exceptions import ConfigurationError
from model.config import PRESETS, ModelConfig
from train.config import TrainConfig
from .corpus import CorpusSpec
from .wavio import FORMATS

logger = logging.getLogger(__name__)


class DataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    path: Optional[str] = None
    synthetic: bool = False
    max_clips: Optional[int] = Field(default=None, ge=1)
    validation_clips: int = Field(default=0, ge=0)


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    dir: str = "runs/default"
    run_name: str = "run"
    checkpoint_name: str = "checkpoint.rave"
    wav_format: str = "pcm16"

    @property
    def checkpoint_path(self) -> Path:
        return Path(self.dir) / self.checkpoint_name

    @property
    def metrics_path(self) -> Path:
        return Path(self.dir) / "metrics.csv"


class RunConfig(BaseModel):
    """Everything one `train` invocation needs"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    preset: str = "desk"
    model: ModelConfig = Field(default_factory=lambda: ModelConfig.preset("desk"))
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    corpus: CorpusSpec = Field(default_factory=CorpusSpec)
    output: OutputConfig = Field(default_factory=OutputConfig)

    def with_seed(self, seed: int) -> "RunConfig":
        return self.model_copy(update={
            "model": self.model.model_copy(update={"seed": seed}),
            "train": self.train.model_copy(update={"seed": seed}),
            "corpus": self.corpus.model_copy(update={"seed": seed}),
        })


SECTIONS = {
    "model": ModelConfig,
    "train": TrainConfig,
    "data": DataConfig,
    "corpus": CorpusSpec,
    "output": OutputConfig,
}


def _is_sequence(annotation: Any) -> bool:
    if get_origin(annotation) is Union:
        return any(_is_sequence(arg) for arg in get_args(annotation) if arg is not type(None))
    return get_origin(annotation) in (tuple, list) or annotation in (tuple, list)


def _coerce(raw: Optional[str], annotation: Any = None) -> Any:
    """Text value to a list, None or the stripped string; pydantic converts the rest

    A bare value for a tuple or list field becomes a one-element list.
    """
    if raw is None:
        return None
    text = raw.strip()
    if text.lower() in ("none", "null", ""):
        return None
    if text[0] in "[(" and text[-1] in "])":
        inner = text[1:-1].strip()
        return [part.strip() for part in inner.split(",") if part.strip()] if inner else []
    if "," in text or _is_sequence(annotation):
        return [part.strip() for part in text.split(",") if part.strip()]
    return text


def _errors_to_keys(section: str, error: ValidationError) -> List[str]:
    keys = []
    for item in error.errors():
        loc = ".".join(str(part) for part in item["loc"])
        keys.append(f"{section}.{loc}" if loc else section)
    return keys


def parse_config(text: str) -> RunConfig:
    """Parse config text; every unknown or invalid key is reported at once"""
    entries = dotenv_values(stream=io.StringIO(text), interpolate=False)
    groups: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}
    preset = "desk"
    unknown: List[str] = []

    for key, raw in entries.items():
        if key == "preset":
            preset = (raw or "").strip()
            continue
        section, _, name = key.partition(".")
        if section not in SECTIONS or name not in SECTIONS[section].model_fields:
            unknown.append(key)
            continue
        groups[section][name] = _coerce(raw, SECTIONS[section].model_fields[name].annotation)

    if unknown:
        raise ConfigurationError(f"Unknown configuration keys: {', '.join(unknown)}", keys=unknown)
    if preset not in PRESETS:
        raise ConfigurationError(f"Unknown preset '{preset}', expected one of {sorted(PRESETS)}", keys=["preset"])

    built: Dict[str, BaseModel] = {}
    invalid: List[str] = []
    messages: List[str] = []
    for section, model_cls in SECTIONS.items():
        values = groups[section]
        try:
            if section == "model":
                built[section] = ModelConfig.preset(preset, **values)
            else:
                built[section] = model_cls(**values)
        except ValidationError as e:
            invalid.extend(_errors_to_keys(section, e))
            messages.append(f"{section}: {e.errors()[0]['msg']}")
    if invalid:
        raise ConfigurationError(f"Invalid configuration values for {', '.join(invalid)} ({'; '.join(messages)})", keys=invalid)

    if built["output"].wav_format not in FORMATS:
        raise ConfigurationError(f"output.wav_format must be one of {FORMATS}", keys=["output.wav_format"])
    logger.debug(f"Parsed configuration with preset '{preset}' and {len(entries)} keys")
    return RunConfig(preset=preset, **built)


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigurationError(f"Cannot read configuration file {path}: {e}") from e
    return parse_config(text)


def dump_config(run: RunConfig) -> str:
    """Flat text form that parse_config reads back to an equal RunConfig"""
    lines = [f"preset = {run.preset}"]
    for section in SECTIONS:
        values = getattr(run, section).model_dump(mode="json")
        for name in sorted(values):
            value = values[name]
            if value is None:
                text = "none"
            elif isinstance(value, list):
                text = "[" + ", ".join(json.dumps(v) for v in value) + "]"
            elif isinstance(value, bool):
                text = "true" if value else "false"
            else:
                text = str(value)
            lines.append(f"{section}.{name} = {text}")
    return "\n".join(lines) + "\n"
