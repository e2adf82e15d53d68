"""TOML configuration with environment interpolation and flag overrides.

Precedence, lowest to highest: built-in defaults, config file, command
line overrides. String values may reference environment variables as
``${NAME}``; a missing variable is a named config error, so secrets can
be pulled from the environment without ever living in the file. Putting
a literal credential in the file (an ``api_key`` key) is rejected
outright: only the *name* of the variable (``api_key_env``) belongs in
config.
"""

from __future__ import annotations

import json
import os
import re
import sys
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

_ENV_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")

_FORBIDDEN_KEYS = ("api_key", "apikey", "token", "secret", "judge_token", "password")


def _interpolate(value: str, field: str) -> str:
    def replace(match: re.Match) -> str:
        name = match.group(1)
        if name not in os.environ:
            raise ConfigError(field, f"environment variable {name} is not set")
        return os.environ[name]

    return _ENV_RE.sub(replace, value)


def _walk(obj: Any, prefix: str) -> Any:
    if isinstance(obj, str):
        return _interpolate(obj, prefix)
    if isinstance(obj, dict):
        out = {}
        for key, value in obj.items():
            field = f"{prefix}.{key}" if prefix else key
            if key.lower() in _FORBIDDEN_KEYS:
                raise ConfigError(
                    field,
                    "credentials must come from the environment; "
                    "name the variable with api_key_env instead",
                )
            out[key] = _walk(value, field)
        return out
    if isinstance(obj, list):
        return [_walk(item, f"{prefix}[{i}]") for i, item in enumerate(obj)]
    return obj


def load_config(path: Path | str) -> dict:
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(str(path), "config file not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"invalid TOML: {exc}") from exc
    return _walk(raw, "")


def apply_overrides(config: dict, overrides) -> dict:
    """Apply ``dotted.key=value`` overrides; values parse as JSON, else string."""
    merged = json.loads(json.dumps(config))  # deep copy of plain data
    for override in overrides:
        if "=" not in override:
            raise ConfigError(override, "override must look like section.key=value")
        dotted, _, raw_value = override.partition("=")
        dotted = dotted.strip()
        if not dotted:
            raise ConfigError(override, "override key must be non-empty")
        try:
            value = json.loads(raw_value)
        except json.JSONDecodeError:
            value = raw_value
        if isinstance(value, str):
            value = _interpolate(value, dotted)
        target = merged
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = target.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(dotted, f"cannot override inside non-table key {part!r}")
            target = node
        if parts[-1].lower() in _FORBIDDEN_KEYS:
            raise ConfigError(dotted, "credentials must come from the environment")
        target[parts[-1]] = value
    return merged


_MISSING = object()


def get_path(config: dict, dotted: str, default: Any = _MISSING) -> Any:
    node: Any = config
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is _MISSING:
                raise ConfigError(dotted, "required config key is missing")
            return default
        node = node[part]
    return node


def require_type(config: dict, dotted: str, kind: type, default: Any = _MISSING) -> Any:
    value = get_path(config, dotted, default)
    if value is None and default is None:
        return None
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ConfigError(dotted, f"expected {kind.__name__}, got {type(value).__name__}")
    return value
