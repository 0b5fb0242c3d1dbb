"""Deterministic CSV/JSON writers and the run manifest."""

import csv
import hashlib
import json
import logging
import platform
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence

import numpy as np
import scipy

from .. import __version__

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def write_csv(path: Path, rows: Iterable[Sequence[Any]]) -> Path:
    """Write rows (header first) with ``\\n`` line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        for row in rows:
            writer.writerow(row)
    logger.debug(f"Wrote {path}")
    return path


def read_csv(path: Path) -> list:
    """Read a CSV written by ``write_csv`` into dict rows."""
    with Path(path).open(newline="") as handle:
        return list(csv.DictReader(handle))


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def write_json(path: Path, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    logger.debug(f"Wrote {path}")
    return path


def config_hash(config: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a command configuration."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def write_manifest(out_dir: Path, command: str, seed: int, config: Dict[str, Any]) -> Path:
    """
    Record versions, seed and config hash next to a command's outputs.

    Thread counts and timestamps are never recorded.
    """
    manifest = {
        "command": command,
        "seed": seed,
        "config": config,
        "config_sha256": config_hash(config),
        "versions": {
            "hirrr": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    return write_json(Path(out_dir) / MANIFEST_NAME, manifest)
