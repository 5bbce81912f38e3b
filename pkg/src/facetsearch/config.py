"""Flat key=value run configuration shared by the CLI and the service.

Flags always win over the file; the file named by FACETSEARCH_CONFIG is
the default source. Unknown keys are rejected.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

CONFIG_ENV = "FACETSEARCH_CONFIG"

_PATH_KEYS = ("catalog", "vectors", "index", "adapter", "thresholds", "judgments")
_INT_KEYS = ("d", "nlist", "nprobe", "k", "batch", "epochs", "seed")
_FLOAT_KEYS = ("lr",)
_BOOL_KEYS = ("no_filters", "import_embeddings")


@dataclass
class RunConfig:
    catalog: Optional[str] = None
    vectors: Optional[str] = None
    index: Optional[str] = None
    adapter: Optional[str] = None
    thresholds: Optional[str] = None
    judgments: Optional[str] = None
    d: Optional[int] = None
    nlist: Optional[int] = None
    nprobe: Optional[int] = None
    k: Optional[int] = None
    batch: Optional[int] = None
    epochs: Optional[int] = None
    seed: Optional[int] = None
    lr: Optional[float] = None
    no_filters: Optional[bool] = None
    import_embeddings: Optional[bool] = None


_KNOWN = {f.name for f in fields(RunConfig)}


def _parse_bool(key: str, raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"config key {key}: expected a boolean, got {raw!r}")


def parse_run_config(text: str) -> RunConfig:
    cfg = RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"config line {lineno}: expected key=value, got {line!r}")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in _KNOWN:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in _INT_KEYS:
            parsed: object = int(value)
        elif key in _FLOAT_KEYS:
            parsed = float(value)
        elif key in _BOOL_KEYS:
            parsed = _parse_bool(key, value)
        else:
            parsed = value
        setattr(cfg, key, parsed)
    return cfg


def load_run_config(path: str | Path) -> RunConfig:
    return parse_run_config(Path(path).read_text(encoding="utf-8"))


def run_config_from_env() -> RunConfig:
    """Config from the file named by FACETSEARCH_CONFIG, or empty."""
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    return load_run_config(path)
