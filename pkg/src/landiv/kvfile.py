"""Line-oriented ``key=value`` files.

Every configuration artifact in the package (column maps, estimation specs,
scenarios, rate cards, parcels) uses the same flat format: one ``key = value``
per line, ``#`` or ``;`` comments, no sections.
"""

from __future__ import annotations

import configparser
from pathlib import Path

_SECTION = "root"


def parse_kv(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(
        interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
        inline_comment_prefixes=("#",),
    )
    parser.optionxform = str  # keep key case
    parser.read_string(f"[{_SECTION}]\n{text}")
    return dict(parser[_SECTION])


def read_kv(path: str | Path) -> dict[str, str]:
    return parse_kv(Path(path).read_text())


def split_list(value: str) -> list[str]:
    """Split a comma-separated value, dropping empty items."""
    return [item.strip() for item in value.split(",") if item.strip()]


def parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in {"1", "true", "yes", "on"}:
        return True
    if lowered in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"not a boolean: {value!r}")
