"""Dataclass <-> dict plumbing for config and artifact files."""

from __future__ import annotations

import dataclasses
import json
import typing

from .errors import ConfigParseError, IOFailure


def to_dict(obj):
    """Recursively convert a (possibly nested) dataclass to JSON-able types."""
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    return obj


def from_dict(cls, data, path: str = "config"):
    """Build a dataclass from a dict, recursing into dataclass-typed fields.

    Unknown keys are an error: configs are echoed into results files, so a
    silently ignored typo would corrupt reproducibility.
    """
    if not isinstance(data, dict):
        raise ConfigParseError(f"{path}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigParseError(f"{path}: unknown fields {unknown}")
    kwargs = {}
    for name, value in data.items():
        hint = hints.get(name)
        if dataclasses.is_dataclass(hint) and isinstance(value, dict):
            kwargs[name] = from_dict(hint, value, f"{path}.{name}")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigParseError(f"{path}: {e}") from e


def load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise IOFailure(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"{path}: invalid JSON ({e})") from e


def dump_json(data, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=1)
            f.write("\n")
    except OSError as e:
        raise IOFailure(f"cannot write {path}: {e}") from e
