"""Settings loader for hlk: config.yaml plus environment overrides."""
from __future__ import annotations

import functools
import os
from pathlib import Path

import yaml
from pydantic import BaseModel, Field, ValidationError


class AutomataSettings(BaseModel):
    state_cap: int = Field(6, ge=1)
    max_output_states: int = Field(20000, ge=1)
    max_letters_vocabulary: int = Field(10, ge=1)


class SemanticsSettings(BaseModel):
    path_bound: int = Field(4, ge=1)
    depth_bound: int = Field(3, ge=0)
    labeling_bound: int = Field(6, ge=1)
    horizon: int = Field(6, ge=1)
    so_cap: int = Field(16, ge=1)


class CombSettings(BaseModel):
    max_states: int = Field(2, ge=1)
    max_depth: int = Field(6, ge=1)
    max_tooth_span: int = Field(3, ge=1)
    max_bound_bits: int = Field(4096, ge=8)


class LoggingSettings(BaseModel):
    level: str = "INFO"
    file: str = "logs/hlk.log"
    console: bool = False


class HlkSettings(BaseModel):
    automata: AutomataSettings = AutomataSettings()
    semantics: SemanticsSettings = SemanticsSettings()
    comb: CombSettings = CombSettings()
    logging: LoggingSettings = LoggingSettings()


DEFAULT_CONFIG_PATH = Path(__file__).with_name("config.yaml")


def load_settings(config_path: str | os.PathLike | None = None) -> HlkSettings:
    path = Path(config_path or os.getenv("HLK_CONFIG") or DEFAULT_CONFIG_PATH)
    raw: dict = {}
    if path.exists():
        with open(path, encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: top level must be a mapping")

    # Env override
    cap = os.getenv("HLK_STATE_CAP")
    if cap:
        try:
            raw.setdefault("automata", {})["state_cap"] = int(cap)
        except ValueError:
            raise ValueError(f"HLK_STATE_CAP must be an integer, got {cap!r}") from None

    try:
        return HlkSettings(**raw)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        raise ValueError(f"{path}: invalid value for {key}: {first['msg']}") from None


@functools.lru_cache(maxsize=1)
def get_settings() -> HlkSettings:
    return load_settings()


def reload_settings() -> HlkSettings:
    get_settings.cache_clear()
    return get_settings()
