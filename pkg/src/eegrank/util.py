"""Small serialization and filesystem helpers shared across the package."""

from __future__ import annotations

import json
import os
from pathlib import Path


def canonical_json(obj, indent: int | None = None) -> str:
    """Deterministic JSON text: sorted keys, stable separators."""
    separators = (",", ": ") if indent else (",", ":")
    return json.dumps(obj, sort_keys=True, indent=indent, separators=separators,
                      ensure_ascii=False)


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    """Write text to a temp file in the target directory, then rename over."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".part")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
    return path


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".part")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    return path
