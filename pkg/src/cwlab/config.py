"""Flat `key = value` configuration files.

Lines are `key = value` with `#` comments and blank lines ignored.
Values stay strings until a caller casts them; helpers are provided for
the common casts.  Command-line flags override file values, which
override built-in defaults.
"""

from __future__ import annotations

from .errors import CsvParseError, DomainError

__all__ = ["parse_config", "parse_config_file", "dump_config",
           "as_int", "as_float", "as_str"]


def parse_config(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CsvParseError(
                f"line {lineno}: expected 'key = value', got {raw!r}",
                line_number=lineno,
            )
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def parse_config_file(path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(values: dict) -> str:
    """Render a configuration dict in the same flat format, sorted by key."""
    lines = [f"{k} = {values[k]}" for k in sorted(values)]
    return "\n".join(lines) + "\n"


def as_int(values: dict, key: str, default: int) -> int:
    if key not in values:
        return default
    try:
        return int(values[key])
    except ValueError:
        raise DomainError(f"config key {key} = {values[key]!r} is not an integer")


def as_float(values: dict, key: str, default: float) -> float:
    if key not in values:
        return default
    try:
        return float(values[key])
    except ValueError:
        raise DomainError(f"config key {key} = {values[key]!r} is not a number")


def as_str(values: dict, key: str, default: str) -> str:
    return str(values.get(key, default))
