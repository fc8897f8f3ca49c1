"""Run configuration: YAML file + ``key=value`` overrides + defaults."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigTypeError, MissingRequired, UnknownKey

COMMANDS = ("solve", "simulate", "validate", "bench")

ALIASES = {"tol": "tolerance", "radius": "radius_in_mesh_units"}


@dataclass
class RunConfig:
    command: str
    dataset: str | None = None
    p: float | None = None
    psi1: str | None = None
    psi2: str | None = None
    f: str | None = None
    h: float = 0.05
    a: float = 1.0
    collar: float = 0.2
    radius_in_mesh_units: int = 3
    tolerance: float = 1e-3
    max_iterations: int = 200_000
    seed: int = 0
    runs: int = 10_000
    probes: list = field(default_factory=lambda: [[0.0, 0.0]])
    eta_stop: float | None = None
    radii: list = field(default_factory=lambda: [15, 10, 5, 3])
    p_values: list = field(default_factory=lambda: [3, 4, 5, 10, 25, 50, 100])
    bench_datasets: list = field(default_factory=lambda: ["try1_p2", "try1_p100", "case_a_p10", "case_b_p10",
                                                          "case_c_p10"])
    error_tolerance: float = 1e-8
    out: str = "out"

    @property
    def eps(self) -> float:
        return self.radius_in_mesh_units * self.h

    def to_dict(self) -> dict:
        return asdict(self)


_FLOAT = {"p", "h", "a", "collar", "tolerance", "eta_stop", "error_tolerance"}
_POSITIVE = {"h", "a", "collar", "tolerance", "eta_stop", "error_tolerance", "radius_in_mesh_units",
             "max_iterations", "runs"}
_INT = {"radius_in_mesh_units", "max_iterations", "seed", "runs"}
_STR = {"dataset", "psi1", "psi2", "f", "out"}
KEYS = _FLOAT | _INT | _STR | {"probes", "radii", "p_values", "bench_datasets"}

# the default radius list (up to 15 mesh units) only fits the 0.2 collar on a fine lattice
BENCH_DEFAULT_H = 0.0125


def _as_float(key, v):
    if isinstance(v, bool):
        raise ConfigTypeError(f"{key}: expected a number, got {v!r}")
    try:
        out = float(v)
    except (TypeError, ValueError):
        raise ConfigTypeError(f"{key}: expected a number, got {v!r}") from None
    if not math.isfinite(out):
        raise ConfigTypeError(f"{key}: must be finite, got {v!r}")
    return out


def _as_int(key, v):
    f = _as_float(key, v)
    if f != int(f):
        raise ConfigTypeError(f"{key}: expected an integer, got {v!r}")
    return int(f)


def _coerce(key: str, v):
    if key in _FLOAT:
        out = _as_float(key, v)
    elif key in _INT:
        out = _as_int(key, v)
    elif key in _STR:
        if not isinstance(v, (str, int, float)) or isinstance(v, bool):
            raise ConfigTypeError(f"{key}: expected a string, got {v!r}")
        out = str(v)
    elif key == "probes":
        try:
            out = [[float(c) for c in pt] for pt in v]
        except (TypeError, ValueError):
            raise ConfigTypeError(f"probes: expected a list of [x, y] pairs, got {v!r}") from None
        if any(len(pt) != 2 for pt in out):
            raise ConfigTypeError("probes: every probe needs exactly two coordinates")
    elif key == "radii":
        if not isinstance(v, (list, tuple)) or not v:
            raise ConfigTypeError(f"radii: expected a non-empty list, got {v!r}")
        out = [_as_int(key, r) for r in v]
    elif key == "p_values":
        if not isinstance(v, (list, tuple)) or not v:
            raise ConfigTypeError(f"p_values: expected a non-empty list, got {v!r}")
        out = [_as_float(key, r) for r in v]
    elif key == "bench_datasets":
        if not isinstance(v, (list, tuple)) or not v or not all(isinstance(d, str) for d in v):
            raise ConfigTypeError(f"bench_datasets: expected a non-empty list of names, got {v!r}")
        out = list(v)
    else:  # pragma: no cover - guarded by KEYS
        raise UnknownKey(key)
    if key in _POSITIVE and out <= 0:
        raise ConfigTypeError(f"{key}: must be positive, got {v!r}")
    return out


def _normalize(raw: dict, origin: str) -> dict:
    out = {}
    for key, value in raw.items():
        key = ALIASES.get(str(key), str(key))
        if key not in KEYS:
            raise UnknownKey(f"unknown config key {key!r} ({origin})")
        out[key] = _coerce(key, value)
    return out


def parse_override(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ConfigTypeError(f"override {item!r} is not of the form key=value")
    key, text = item.split("=", 1)
    key = key.strip()
    try:
        value = yaml.safe_load(text)
    except yaml.YAMLError:
        value = text
    if value is None:
        value = text
    return key, value


def parse_config(command: str | None, path: str | Path | None = None, overrides=()) -> RunConfig:
    """Merge defaults < config file < overrides into a RunConfig."""
    if not command:
        raise MissingRequired("a command is required")
    if command not in COMMANDS:
        raise ConfigTypeError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    values: dict = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigTypeError(f"{path}: not valid YAML: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigTypeError(f"{path}: expected a mapping of keys to values")
        values.update(_normalize(data, str(path)))
    values.update(_normalize(dict(parse_override(o) for o in overrides), "override"))

    if command == "bench" and "h" not in values:
        values["h"] = BENCH_DEFAULT_H
    cfg = RunConfig(command=command, **values)
    inline = [cfg.psi1, cfg.psi2, cfg.f]
    if command != "bench":
        if cfg.dataset is None and not all(s is not None for s in inline):
            raise MissingRequired("problem source missing: give `dataset` or all of `psi1`, `psi2`, `f` (and `p`)")
        if cfg.dataset is None and cfg.p is None:
            raise MissingRequired("inline problems need an exponent `p`")
    if cfg.dataset is not None and any(s is not None for s in inline):
        raise ConfigTypeError("give either `dataset` or inline `psi1/psi2/f`, not both")
    return cfg


def resolve_problem(cfg: RunConfig):
    from .fields import builtin_dataset, spec_from_expressions

    if cfg.dataset is not None:
        return builtin_dataset(cfg.dataset, p=cfg.p)
    return spec_from_expressions(cfg.p, cfg.psi1, cfg.psi2, cfg.f)
