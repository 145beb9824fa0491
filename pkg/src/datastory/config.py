"""Pipeline configuration with flags > env > config file > defaults."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping, Optional

from .errors import InputError

API_KEY_ENV = "NP_API_KEY"


@dataclass
class PipelineConfig:
    # gateway
    llm_endpoint: Optional[str] = None
    llm_model: str = "gpt-4-turbo"
    embed_model: str = "text-embedding-3-small"
    api_key: Optional[str] = None
    fixture_dir: Optional[str] = None
    record: bool = False
    # analysis
    similarity_threshold: float = 0.85
    clear_quorum: int = 6
    temperature: float = 0.3
    completion_cap: int = 8
    # optimizer
    weights: tuple[float, float, float] = (1.0, 0.5, 2.0)
    alpha: float = 1.0
    beta: float = 0.5
    beam_width: int = 50
    exhaustive_bound: int = 20_000
    pruning: bool = True
    seed: int = 0
    cost_table: Optional[str] = None
    # storyboard
    min_anim_ms: int = 500
    wpm: int = 150
    min_frame_ms: int = 1000
    tts_url: Optional[str] = None

    @classmethod
    def resolve(
        cls,
        flags: Mapping[str, Any] | None = None,
        config_file: str | Path | None = None,
        env: Mapping[str, str] | None = None,
    ) -> "PipelineConfig":
        env = os.environ if env is None else env
        merged: dict[str, Any] = {}

        if config_file is not None:
            try:
                data = json.loads(Path(config_file).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read config file {config_file}: {exc}") from exc
            known = {f.name for f in fields(cls)}
            unknown = set(data) - known
            if unknown:
                raise InputError(f"unknown config keys: {sorted(unknown)}")
            merged.update(data)

        if env.get(API_KEY_ENV):
            merged["api_key"] = env[API_KEY_ENV]

        for key, value in (flags or {}).items():
            if value is not None:
                merged[key] = value

        if "weights" in merged and not isinstance(merged["weights"], tuple):
            merged["weights"] = parse_weights(merged["weights"])
        return cls(**merged)


def parse_weights(raw: Any) -> tuple[float, float, float]:
    if isinstance(raw, str):
        parts = [p for p in raw.split(",") if p.strip()]
    else:
        parts = list(raw)
    if len(parts) != 3:
        raise InputError(f"weights must be three numbers, got {raw!r}")
    try:
        w = tuple(float(p) for p in parts)
    except (TypeError, ValueError) as exc:
        raise InputError(f"weights must be numeric: {raw!r}") from exc
    return w  # type: ignore[return-value]
