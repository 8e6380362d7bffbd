"""Run configuration: a TOML file (same grammar family as model files) plus CLI overrides."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .models import ModelParseError, ModelSpec, builtin, model_from_table, parse_model, serialize_model

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = ["ConfigError", "RunConfig", "load_config", "resolve_model", "DEFAULTS"]

FORMAT_VERSION = 1

STATE_KINDS = ("boosted-fermi", "fermi-dirac", "uniform", "infinite-temperature", "gibbs")
WINDOW_SHAPES = ("gaussian", "hann")


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""


DEFAULTS = {
    "verify": {"model": "xxz", "ring": 8},
    "cone": {"model": "xxz", "xs": list(range(-5, 6)), "ts": [round(-0.5 + 0.1 * i, 12) for i in range(11)]},
    "sumrule": {
        "model": "fermion",
        "ring": 256,
        "rows": [[16, 16], [32, 16], [64, 16], [16, 128]],
        "tolerance": 0.05,
    },
    "spectrum": {"model": "fermion", "ring": 256, "zmax": 96, "M": [8, 16, 32], "tolerance": 0.10},
}

BUILTIN_DEFAULT_PARAMS = {"xxz": {"lambda": 1.0}, "fermion": {"t": 1.0, "mu": 0.0, "v": 0.0}}


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on.  Serializes to a canonical JSON dict."""

    command: str
    model: str = ""  # serialized model TOML
    ring: int | None = None
    state: dict = field(default_factory=dict)
    window: dict = field(default_factory=dict)
    rows: tuple = ()
    M: tuple = ()
    xs: tuple = ()
    ts: tuple = ()
    zmax: int | None = None
    tolerance: float | None = None
    seed: int = 0
    out: str = "out"

    def model_spec(self) -> ModelSpec:
        return parse_model(self.model)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d["format_version"] = FORMAT_VERSION
        d["rows"] = [list(r) for r in self.rows]
        for k in ("M", "xs", "ts"):
            d[k] = list(d[k])
        return d

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def resolve_model(source: str | dict | None, base: Path | None = None) -> ModelSpec:
    """A model from a built-in name, a one-line stanza, a model file path or a ``[model]`` table."""
    if source is None:
        raise ConfigError("no model given")
    if isinstance(source, dict):
        if "file" in source:
            return resolve_model(str(source["file"]), base)
        return model_from_table(source)
    text = source.strip()
    if text in BUILTIN_DEFAULT_PARAMS:
        return builtin(text, BUILTIN_DEFAULT_PARAMS[text])
    if text.startswith("model") and "=" in text:
        return parse_model(text)
    path = Path(text)
    if base is not None and not path.is_absolute():
        path = base / path
    if not path.exists():
        raise ConfigError(f"model file not found: {text}")
    return parse_model(path.read_text(encoding="utf-8"))


def _default_state(model: ModelSpec) -> dict:
    if model.is_free_fermion:
        return {"kind": "boosted-fermi", "filling": 0.5, "boost": math.pi / 8}
    return {"kind": "infinite-temperature"}


def _check_state(state: dict) -> None:
    kind = state.get("kind")
    if kind not in STATE_KINDS:
        raise ConfigError(f"state.kind must be one of {STATE_KINDS}, got {kind!r}")
    for key, value in state.items():
        if key != "kind" and not isinstance(value, (int, float)):
            raise ConfigError(f"state.{key} must be a number")


def _check_window(window: dict) -> None:
    shape = window.get("shape", "gaussian")
    if shape not in WINDOW_SHAPES:
        raise ConfigError(f"window.shape must be one of {WINDOW_SHAPES}, got {shape!r}")
    for key in ("sigma", "T", "dt"):
        if key in window and not (isinstance(window[key], (int, float)) and window[key] > 0):
            raise ConfigError(f"window.{key} must be a positive number")


def _read_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        return tomllib.loads(p.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_config(command: str, *, config_path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults, the config file and flag overrides (in that order)."""
    if command not in DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    doc = _read_file(config_path) if config_path else {}
    base = Path(config_path).parent if config_path else None
    run = dict(DEFAULTS[command])
    run.update(doc.get("run", {}))
    run.update(doc.get(command, {}))
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    try:
        if "model" in overrides:
            model = resolve_model(overrides["model"])
        elif "model" in doc:
            model = resolve_model(doc["model"], base)
        else:
            model = resolve_model(run["model"])
    except ModelParseError as exc:
        raise ConfigError(f"model: {exc}") from None

    state = dict(_default_state(model))
    state.update(doc.get("state", {}))
    _check_state(state)
    window = {"shape": "gaussian", "sigma": 1.5, "T": 6.0, "dt": 0.05}
    window.update(doc.get("window", {}))
    for key in ("window", "sigma", "T", "dt"):
        if key in overrides:
            window["shape" if key == "window" else key] = overrides[key]
    _check_window(window)

    rows = [tuple(int(v) for v in r) for r in run.get("rows", [])]
    if "L" in overrides or "M" in overrides:
        if command == "sumrule":
            if "L" not in overrides or "M" not in overrides:
                raise ConfigError("--L and --M go together")
            rows = [(int(overrides["L"]), int(overrides["M"]))]
    Ms = run.get("M", [])
    if command == "spectrum" and "M" in overrides:
        Ms = [int(overrides["M"])]

    try:
        cfg = RunConfig(
            command=command,
            model=serialize_model(model),
            ring=int(overrides.get("ring", run.get("ring"))) if overrides.get("ring", run.get("ring")) is not None else None,
            state=state,
            window=window,
            rows=tuple(rows),
            M=tuple(int(m) for m in Ms),
            xs=tuple(int(x) for x in run.get("xs", [])),
            ts=tuple(float(t) for t in run.get("ts", [])),
            zmax=int(overrides.get("zmax", run.get("zmax"))) if overrides.get("zmax", run.get("zmax")) is not None else None,
            tolerance=float(overrides.get("tolerance", run.get("tolerance"))) if overrides.get("tolerance", run.get("tolerance")) is not None else None,
            seed=int(overrides.get("seed", run.get("seed", 0))),
            out=str(overrides.get("out", run.get("out", "out"))),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.ring is not None and cfg.ring < 2:
        raise ConfigError("ring must have at least 2 sites")
    for L, M in cfg.rows:
        if L < 0 or M <= 0:
            raise ConfigError(f"invalid sum-rule row (L={L}, M={M})")
    return cfg


def with_out(cfg: RunConfig, out: str) -> RunConfig:
    return replace(cfg, out=out)
