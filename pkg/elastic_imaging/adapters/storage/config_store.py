from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict

import yaml
from pydantic import ValidationError

from elastic_imaging.domain.config import ScenarioConfig
from elastic_imaging.domain.errors import ConfigError

logger = logging.getLogger(__name__)


def _field_path(loc) -> str:
    return ".".join(str(part) for part in loc)


def parse_config(data: Dict[str, Any]) -> ScenarioConfig:
    """Validate a nested mapping; unknown keys and constraint violations name the field."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = _field_path(first["loc"])
        msg = first["msg"]
        if first["type"] == "extra_forbidden":
            msg = f"unknown key {first['loc'][-1]!r}"
        raise ConfigError(f"{field}: {msg}", field=field) from e


def load_config(path: str | Path) -> ScenarioConfig:
    """
    Load a scenario from YAML.
    Syntax errors carry the 1-based line number.
    """
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    with p.open("r", encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            where = f" (line {line})" if line is not None else ""
            raise ConfigError(f"cannot parse {p}{where}: {e}", line=line) from e
    config = parse_config(data if data is not None else {})
    logger.info("loaded config %s (hash %s)", p, config.config_hash()[:12])
    return config


def save_config(config: ScenarioConfig, path: str | Path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as f:
        yaml.safe_dump(config.model_dump(mode="json"), f, sort_keys=False)
