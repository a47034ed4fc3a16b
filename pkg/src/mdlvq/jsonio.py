"""JSON emission with fixed float formatting, plus config validation.

Floats are written with 17 significant digits so every value round-trips
exactly and output files are byte-identical across runs.
"""

from __future__ import annotations

import json
import math

from .errors import ConfigError, MdlvqError


def _emit(obj, out: list[str], indent: int, level: int) -> None:
    pad = " " * (indent * level)
    pad_in = " " * (indent * (level + 1))
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        if not math.isfinite(obj):
            raise MdlvqError("cannot serialize non-finite float")
        out.append(format(obj, ".17g"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            if not isinstance(k, str):
                raise MdlvqError("JSON object keys must be strings")
            out.append(pad_in + json.dumps(k) + ": ")
            _emit(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not len(obj):
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad_in)
            _emit(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "]")
    else:
        raise MdlvqError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    out: list[str] = []
    _emit(obj, out, indent, 0)
    out.append("\n")
    return "".join(out)


def dump(obj, path, indent: int = 2) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj, indent))


def load(path):
    with open(path) as fh:
        return json.load(fh)


def validate_config(config: dict, schema: dict[str, tuple], name: str) -> dict:
    """Check a config dict against {key: (type(s), required, default)}.

    Unknown keys are rejected; missing optional keys pick up their default.
    """
    if not isinstance(config, dict):
        raise ConfigError(f"{name} config must be a JSON object")
    unknown = set(config) - set(schema)
    if unknown:
        raise ConfigError(f"{name} config has unknown keys: {sorted(unknown)}")
    out = {}
    for key, (types, required, default) in schema.items():
        if key in config:
            value = config[key]
            if isinstance(value, bool) and bool not in (
                types if isinstance(types, tuple) else (types,)
            ):
                raise ConfigError(f"{name} config key {key!r} has wrong type")
            if not isinstance(value, types):
                raise ConfigError(
                    f"{name} config key {key!r} must be {types}, got {type(value).__name__}"
                )
            out[key] = value
        elif required:
            raise ConfigError(f"{name} config is missing required key {key!r}")
        else:
            out[key] = default
    return out
