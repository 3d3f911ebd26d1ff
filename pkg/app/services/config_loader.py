import logging
from typing import Any, Dict, List, Optional, Sequence

import yaml
from pydantic import ValidationError

from app.core.exceptions import ConfigError
from app.schemas.experiment import ExperimentSpec

logger = logging.getLogger(__name__)


def _describe(error: Dict[str, Any]) -> List[str]:
    location = ".".join(str(part) for part in error.get("loc", ()))
    message = error.get("msg", "invalid value")
    if message.startswith("Value error, "):
        message = message[len("Value error, "):]
    # Model-level checks report several problems in one message
    parts = [p for p in message.split("; ") if p]
    return [f"{location}: {p}" if location else p for p in parts]


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Applies `a.b.c=value` assignments; values are read as YAML scalars or lists."""
    for override in overrides:
        key, sep, raw = override.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"Override must look like key=value, got {override!r}")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as e:
            raise ConfigError(f"Override {override!r} has an unreadable value: {e}")

        node = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            if not isinstance(child, dict):
                raise ConfigError(f"Override {override!r}: {part} is not a section")
            node = child
        node[parts[-1]] = value
        logger.debug(f"Override {key.strip()} = {value!r}")
    return data


def validate_mapping(data: Optional[Dict[str, Any]], source: str = "configuration") -> ExperimentSpec:
    try:
        return ExperimentSpec.model_validate(data or {})
    except ValidationError as e:
        problems = [line for error in e.errors() for line in _describe(error)]
        raise ConfigError(f"Invalid {source}: {len(problems)} problem(s)", problems) from e


def parse_text(text: str, source: str = "<string>") -> Dict[str, Any]:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigError(f"Cannot parse {source}{where}: {problem}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source} must contain a mapping at the top level, got {type(data).__name__}")
    return data


def load_config(path: str, overrides: Sequence[str] = (), experiment: Optional[str] = None,
                seed: Optional[int] = None, output_path: Optional[str] = None) -> ExperimentSpec:
    """
    Reads an experiment YAML file, applies CLI overrides and validates it.
    Every validation problem is reported, not only the first.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as e:
        raise ConfigError(f"Cannot read {path}: {e.strerror or e}") from e

    data = apply_overrides(parse_text(text, path), overrides)
    if experiment is not None:
        data["name"] = experiment
    if seed is not None:
        data["seed"] = seed
    if output_path is not None:
        data["output_path"] = output_path

    spec = validate_mapping(data, path)
    logger.info(f"Loaded {spec.name.value} from {path}")
    return spec
