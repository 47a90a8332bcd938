"""Small file helpers shared by the CSV and SVG writers."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path


def atomic_write_text(path: Path, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path`` and rename it over."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt_float(value: float) -> str:
    """17-significant-digit decimal; empty string for NaN (not computed)."""
    if value != value:
        return ""
    return f"{value:.17g}"


def parse_float(text: str) -> float:
    text = text.strip()
    return float("nan") if text == "" else float(text)
