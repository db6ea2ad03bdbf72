"""Shared utilities for the rail re-scheduling toolkit."""

import dataclasses
import hashlib
import json
from collections.abc import Callable, Mapping
from enum import Enum
from pathlib import Path
from typing import Any, TypeVar

from dotenv import dotenv_values
from rich.console import Console


# Constants
CONFIG_TRUE_VALUES = {"1", "true", "yes", "on"}
CONFIG_FALSE_VALUES = {"0", "false", "no", "off"}

# Global console instance for rich output
console = Console()

T = TypeVar("T")


def get_console() -> Console:
    """
    Get the global console instance for rich output.

    Returns
    -------
    Console
        Rich Console instance for formatted output.
    """
    return console


def warn(message: str) -> None:
    """Print a warning line through the shared console."""
    console.print(f"[yellow]⚠ {message}[/yellow]")


def _jsonable(value: Any) -> Any:
    """Convert dataclasses, enums, paths and tuples into JSON-friendly values."""
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {
            field.name: _jsonable(getattr(value, field.name))
            for field in dataclasses.fields(value)
        }
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, frozenset, set)):
        items = [_jsonable(v) for v in value]
        return sorted(items, key=str) if isinstance(value, (set, frozenset)) else items
    return value


def canonical_json(value: Any) -> str:
    """
    Serialize a value (dataclasses included) to canonical JSON.

    Parameters
    ----------
    value : Any
        Value to serialize.

    Returns
    -------
    str
        JSON text with sorted keys and no insignificant whitespace.
    """
    return json.dumps(_jsonable(value), sort_keys=True, separators=(",", ":"))


def pretty_json(value: Any) -> str:
    """Serialize a value to indented JSON with sorted keys and a final newline."""
    return json.dumps(_jsonable(value), sort_keys=True, indent=2) + "\n"


def text_digest(text: str) -> str:
    """Return the SHA-256 hex digest of a UTF-8 string."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def config_digest(*configs: Any) -> str:
    """
    Hash one or more resolved configuration objects.

    Parameters
    ----------
    *configs : Any
        Dataclasses or plain values making up the configuration.

    Returns
    -------
    str
        SHA-256 hex digest of their canonical JSON form.
    """
    return text_digest(canonical_json(list(configs)))


def load_config(config_file: str | Path | None) -> dict[str, str]:
    """
    Read a KEY=VALUE configuration file.

    Parameters
    ----------
    config_file : str | Path | None
        Path to the configuration file. ``None`` yields an empty mapping.

    Returns
    -------
    dict[str, str]
        Upper-cased keys mapped to their raw string values.

    Raises
    ------
    FileNotFoundError
        If the configuration file does not exist.
    """
    if config_file is None:
        return {}
    path = Path(config_file)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    values = dotenv_values(path)
    return {key.upper(): value for key, value in values.items() if value is not None}


def parse_bool(value: str) -> bool:
    """
    Parse a boolean configuration value.

    Parameters
    ----------
    value : str
        Raw value such as ``true`` or ``0``.

    Returns
    -------
    bool
        Parsed flag.

    Raises
    ------
    ValueError
        If the value is not a recognised boolean spelling.
    """
    lowered = value.strip().lower()
    if lowered in CONFIG_TRUE_VALUES:
        return True
    if lowered in CONFIG_FALSE_VALUES:
        return False
    raise ValueError(f"Invalid boolean value: {value!r}")


def resolve_option(
    flag_value: T | None,
    config: Mapping[str, str],
    key: str,
    default: T,
    cast: Callable[[str], T],
) -> T:
    """
    Resolve one option with precedence flag > config file > default.

    Parameters
    ----------
    flag_value : T | None
        Value given on the command line, ``None`` when the flag was omitted.
    config : Mapping[str, str]
        Values loaded from the configuration file.
    key : str
        Configuration key (upper snake case).
    default : T
        Built-in default.
    cast : Callable[[str], T]
        Converter applied to the raw configuration string.

    Returns
    -------
    T
        The resolved value.
    """
    if flag_value is not None:
        return flag_value
    if key in config:
        return cast(config[key])
    return default


def format_clock(seconds: int) -> str:
    """Format seconds since midnight as ``HH:MM``."""
    hours, remainder = divmod(int(seconds), 3600)
    return f"{hours % 24:02d}:{remainder // 60:02d}"
