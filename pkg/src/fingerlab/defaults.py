"""Versioned, calibrated default constants.

Every calibrated number lives in ``defaults.json`` next to this module so the
whole set can be audited (and overridden) in one place.
"""
from __future__ import annotations

import copy
import json
from importlib import resources
from typing import Any

with resources.files(__package__).joinpath("defaults.json").open("r", encoding="utf-8") as _fh:
    DEFAULTS: dict[str, Any] = json.load(_fh)

VERSION: str = DEFAULTS["version"]


def load_defaults() -> dict[str, Any]:
    """Return a deep copy of the defaults document."""
    return copy.deepcopy(DEFAULTS)


def merged(overrides: dict[str, Any] | None) -> dict[str, Any]:
    """Defaults with ``overrides`` merged in recursively."""
    out = load_defaults()
    if overrides:
        _merge(out, overrides)
    return out


def _merge(base: dict, extra: dict) -> None:
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
