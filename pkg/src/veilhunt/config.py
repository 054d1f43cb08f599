"""Flat key=value run configuration.

Every synthesizer and protocol parameter is addressable by its field name;
CLI flags override file values.  Lines starting with '#' and blank lines are
ignored.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .pipeline import RunParams
from .synth import SynthConfig


class ConfigError(ValueError):
    pass


def parse_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _coerce(name: str, raw: str, annotation: str):
    annotation = annotation.replace(" ", "")
    try:
        if annotation in ("int", "int|None"):
            if raw.lower() in ("none", "") and "None" in annotation:
                return None
            return int(raw)
        if annotation == "float":
            return float(raw)
        if annotation == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def _apply(cls, values: dict[str, str], used: set[str]):
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in values:
            kwargs[f.name] = _coerce(f.name, values[f.name], str(f.type))
            used.add(f.name)
    return cls(**kwargs)


def build_configs(values: dict[str, str]) -> tuple[SynthConfig, RunParams]:
    """Split flat keys across the synth and protocol parameter sets."""
    used: set[str] = set()
    synth = _apply(SynthConfig, values, used)
    params = _apply(RunParams, values, used)
    unknown = set(values) - used
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    return synth, params


def known_keys() -> list[str]:
    keys = [f.name for f in dataclasses.fields(SynthConfig)]
    keys += [f.name for f in dataclasses.fields(RunParams)]
    return sorted(set(keys))
