"""Plain-text key-value configuration files (`key = value`, `#` comments)."""

from __future__ import annotations

from pathlib import Path


def read_kv_config(path: Path | str | None) -> dict[str, str]:
    if path is None:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    out: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {line_no}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out
