"""JSON run configuration for the command line tool.

Example::

    {
      "maps": [
        {"matrix": [0.3, 0.1, 0.1, 0.3], "translation": [-0.5, -0.5]},
        {"matrix": [0.3, 0.1, 0.1, 0.3], "translation": [0.5, 0.5]}
      ],
      "weights": [0.5, 0.5],
      "seed": 0,
      "estimator": {"n_atoms": 100000, "n_theta": 64}
    }

Matrices are row-major, angles are radians.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .affine import AffineMap2, BernoulliWeights, Matrix2
from .errors import ConfigError

SEED_MAX = 2**64 - 1


@dataclass(frozen=True)
class Estimator:
    n_atoms: int = 100_000
    depth: int = 40
    r_min: float = 2.0**-11
    r_max: float = 2.0**-4
    n_r: int = 8
    n_theta: int = 64
    N: float = 6.0
    n_terms: int = 50
    I: tuple[int, ...] = (100, 10_000)
    burn_in: int = 64
    n_steps: int = 1000
    n_samples: int = 100
    n_bins: int = 32
    theta0: tuple[float, ...] = (1.0, 2.0)
    include_exceptional: bool = False


_INT_FIELDS = {"n_atoms", "depth", "n_r", "n_theta", "n_terms", "burn_in", "n_steps", "n_samples", "n_bins"}
_POSITIVE_FIELDS = _INT_FIELDS | {"r_min", "r_max", "N"}


@dataclass(frozen=True)
class RunConfig:
    maps: tuple[AffineMap2, ...]
    weights: BernoulliWeights | None = None
    seed: int = 0
    estimator: Estimator = field(default_factory=Estimator)
    rescale_to_disk: bool = False
    output: str | None = None

    def resolved_weights(self) -> BernoulliWeights:
        return self.weights if self.weights is not None else BernoulliWeights.uniform(len(self.maps))


def _real(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a real number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(f"{where}: value is not finite")
    return v


def _int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _reals(value: Any, n: int, where: str) -> list[float]:
    if not isinstance(value, list) or len(value) != n:
        raise ConfigError(f"{where}: expected a list of {n} reals")
    return [_real(v, f"{where}[{j}]") for j, v in enumerate(value)]


def parse_seed(value: Any, where: str = "seed") -> int:
    s = _int(value, where)
    if not 0 <= s <= SEED_MAX:
        raise ConfigError(f"{where}: must be an unsigned 64-bit integer")
    return s


def _parse_maps(raw: Any) -> tuple[AffineMap2, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("maps: expected a non-empty list")
    maps = []
    for i, m in enumerate(raw):
        where = f"maps[{i}]"
        if not isinstance(m, dict):
            raise ConfigError(f"{where}: expected an object with 'matrix' and 'translation'")
        unknown = set(m) - {"matrix", "translation"}
        if unknown:
            raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
        if "matrix" not in m:
            raise ConfigError(f"{where}.matrix: missing")
        a = _reals(m["matrix"], 4, f"{where}.matrix")
        d = _reals(m.get("translation", [0.0, 0.0]), 2, f"{where}.translation")
        maps.append(AffineMap2(Matrix2(*a), (d[0], d[1])))
    return tuple(maps)


def _parse_weights(raw: Any, k: int) -> BernoulliWeights | None:
    if raw is None:
        return None
    p = _reals(raw, k, "weights") if isinstance(raw, list) else None
    if p is None:
        raise ConfigError("weights: expected a list of reals")
    try:
        return BernoulliWeights(tuple(p))
    except ValueError as exc:
        raise ConfigError(f"weights: {exc}") from None


def _parse_estimator(raw: Any) -> Estimator:
    if raw is None:
        return Estimator()
    if not isinstance(raw, dict):
        raise ConfigError("estimator: expected an object")
    known = {f.name for f in fields(Estimator)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"estimator: unknown keys {sorted(unknown)}")
    vals: dict[str, Any] = {}
    for key, v in raw.items():
        where = f"estimator.{key}"
        if key == "include_exceptional":
            if not isinstance(v, bool):
                raise ConfigError(f"{where}: expected true or false")
            vals[key] = v
        elif key == "I":
            items = v if isinstance(v, list) else [v]
            vals[key] = tuple(_int(x, f"{where}[{j}]") for j, x in enumerate(items))
            if not vals[key] or min(vals[key]) < 1:
                raise ConfigError(f"{where}: expected positive integers")
        elif key == "theta0":
            items = v if isinstance(v, list) else [v]
            vals[key] = tuple(_real(x, f"{where}[{j}]") for j, x in enumerate(items))
            if not vals[key]:
                raise ConfigError(f"{where}: expected at least one angle")
        else:
            vals[key] = _int(v, where) if key in _INT_FIELDS else _real(v, where)
            if key in _POSITIVE_FIELDS and vals[key] <= 0:
                raise ConfigError(f"{where}: must be positive")
    est = replace(Estimator(), **vals)
    if not est.r_min < est.r_max < 1:
        raise ConfigError("estimator: need 0 < r_min < r_max < 1")
    return est


def config_from_dict(doc: Any) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a JSON object")
    unknown = set(doc) - {"maps", "weights", "seed", "estimator", "rescale_to_disk", "output"}
    if unknown:
        raise ConfigError(f"top level: unknown keys {sorted(unknown)}")
    if "maps" not in doc:
        raise ConfigError("maps: missing")
    maps = _parse_maps(doc["maps"])
    rescale = doc.get("rescale_to_disk", False)
    if not isinstance(rescale, bool):
        raise ConfigError("rescale_to_disk: expected true or false")
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output: expected a path string")
    return RunConfig(maps=maps, weights=_parse_weights(doc.get("weights"), len(maps)),
                     seed=parse_seed(doc.get("seed", 0)), estimator=_parse_estimator(doc.get("estimator")),
                     rescale_to_disk=rescale, output=output)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    try:
        return config_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
