"""Environment handling, seed derivation and JSON helpers."""

from __future__ import annotations

import json
import os
import zlib
from pathlib import Path
from typing import Any, Dict

import numpy as np

ENV_PREFIX = "MARKOV_LYAPUNOV_"
_ENV_COMMENT_PREFIXES = ("#", "//")


def load_env(path: Path | None = None) -> Dict[str, str]:
    """Load key/value pairs from a .env file without overriding existing vars."""

    env_path = path or Path(".env")
    if env_path.exists():
        for raw_line in env_path.read_text().splitlines():
            line = raw_line.strip()
            if not line or line.startswith(_ENV_COMMENT_PREFIXES):
                continue
            if "=" not in line:
                continue
            key, value = line.split("=", 1)
            os.environ.setdefault(key.strip(), value.strip())
    return {key: value for key, value in os.environ.items() if key.startswith(ENV_PREFIX)}


def env_str(name: str, default: str) -> str:
    value = os.environ.get(ENV_PREFIX + name, "").strip()
    return value or default


def env_int(name: str, default: int) -> int:
    """Integer setting from the environment; malformed values fall back to the default."""

    raw = os.environ.get(ENV_PREFIX + name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        return default


def default_workers() -> int:
    return max(1, env_int("WORKERS", os.cpu_count() or 1))


def derive_seed(seed: int, label: str) -> int:
    """Independent integer seed for a named stage of a run."""

    sequence = np.random.SeedSequence([int(seed), zlib.crc32(label.encode("utf-8"))])
    return int(sequence.generate_state(1, dtype=np.uint64)[0] % (2**63))


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and complex numbers to JSON-compatible values."""

    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, complex):
        return {"real": value.real, "imag": value.imag}
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_json(path: Path, payload: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
