"""Flat ``key = value`` config files for sweeps and training.

Blank lines and ``#`` comments are ignored. Tuple-valued keys take
comma-separated numbers, optionally as ``start:stop:step`` (inclusive).
"""

from __future__ import annotations

import dataclasses
import typing

import numpy as np


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _numbers(value: str) -> tuple:
    items = []
    for part in value.split(","):
        part = part.strip()
        if ":" in part:
            start, stop, step = (float(x) for x in part.split(":"))
            count = int(round((stop - start) / step)) + 1
            items.extend(round(v, 10) for v in np.linspace(start, start + step * (count - 1), count))
        elif part:
            items.append(float(part))
    return tuple(items)


def _coerce(kind, value: str):
    if kind in (tuple, "tuple"):
        return _numbers(value)
    if kind in (int, "int"):
        return int(value)
    if kind in (float, "float"):
        return float(value)
    return value


def load_dataclass(cls, text: str, **overrides):
    """Build ``cls`` from config text; unknown keys are rejected."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for key, value in parse_kv(text).items():
        if key not in fields:
            raise ValueError(f"unknown key {key!r} for {cls.__name__}; known: {', '.join(fields)}")
        kwargs[key] = _coerce(hints[key], value)
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**kwargs)


def describe(cls) -> str:
    lines = []
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else None
        if isinstance(default, tuple):
            default = ",".join(f"{v:g}" for v in default)
        lines.append(f"  {f.name} (default {default})")
    return "\n".join(lines)
