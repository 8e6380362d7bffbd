"""Deterministic CSV/JSON output and the run manifest."""

from __future__ import annotations

import hashlib
import json
import math
import platform
from pathlib import Path

import numpy as np
import scipy

from . import __version__

__all__ = ["format_value", "csv_text", "write_csv", "write_json", "write_manifest", "CSV_COLUMNS"]

CSV_COLUMNS = {
    "cone": ("x", "t", "measured", "bound", "valid_flag"),
    "convergence": ("L", "M", "value", "target", "rel_dev", "status"),
    "correlation": ("z", "t", "re", "im"),
    "spectral": ("k", "eps", "re", "im"),
    "theorem": ("route", "value", "imag", "target", "rel_dev"),
    "terms": ("M", "term_outer", "term_inner", "term_moment", "total"),
}


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def csv_text(columns, rows) -> str:
    lines = [",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path: Path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(columns, rows), encoding="utf-8", newline="\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out: Path, config: dict, config_hash: str, files) -> Path:
    out = Path(out)
    manifest = {
        "config": config,
        "config_hash": config_hash,
        "files": {Path(f).name: _sha256(f) for f in files},
        "versions": {
            "nesscurrent": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    return write_json(out / "manifest.json", manifest)
