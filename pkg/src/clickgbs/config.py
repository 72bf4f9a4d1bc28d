"""Experiment configuration: a JSON document validated into a dataclass.

Example::

    {
      "M": 16, "M_prime": 8, "n_ph": 2.0, "epsilon": 0.1, "eta": 0.8,
      "unitary_seed": 7, "seed": 1,
      "detector": {"kind": "click", "K": 2},
      "estimator": {"method": "phase-space", "E_S": 100000, "grid": "full"},
      "classical": {"state": "thermal", "N": 10000},
      "validation": {"l": [0, 1, 2], "min_count": 10, "N_O": 2000}
    }

Exactly one of ``r`` and ``n_ph`` must be present.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .detectors import DetectorModel, detector_from_spec
from .gaussian import solve_squeezing

__all__ = ["ConfigError", "ExperimentConfig", "EstimatorSpec", "ClassicalSpec", "ValidationSpec", "load_config"]


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _check(cond: bool, name: str, message: str):
    if not cond:
        raise ConfigError(name, message)


def _known(d: dict, allowed: set, where: str):
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{where}{sorted(extra)[0]}", "unknown field")


@dataclass(frozen=True)
class EstimatorSpec:
    method: str = "phase-space"
    E_S: int = 100_000
    N_S: int = 1000
    grid: str = "full"
    D: int | None = None
    J: int | None = None
    min_probability: float = 1e-3
    max_clicks: int = 8

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorSpec":
        _known(d, set(cls.__dataclass_fields__), "estimator.")
        spec = cls(**d)
        _check(spec.method in ("phase-space", "direct"), "estimator.method", "must be 'phase-space' or 'direct'")
        _check(spec.grid in ("full", "folded", "auto"), "estimator.grid", "must be 'full', 'folded' or 'auto'")
        _check(int(spec.E_S) >= 1, "estimator.E_S", "must be >= 1")
        _check(int(spec.N_S) >= 1, "estimator.N_S", "must be >= 1")
        if spec.grid == "folded":
            _check(spec.D is not None and spec.D >= 1, "estimator.D", "folded grid needs D >= 1")
            _check(spec.J is not None and spec.J >= 1, "estimator.J", "folded grid needs J >= 1")
        return spec


@dataclass(frozen=True)
class ClassicalSpec:
    state: str = "thermal"
    N: int = 10_000

    @classmethod
    def from_dict(cls, d: dict) -> "ClassicalSpec":
        _known(d, set(cls.__dataclass_fields__), "classical.")
        spec = cls(**d)
        _check(spec.state in ("thermal", "squashed"), "classical.state", "must be 'thermal' or 'squashed'")
        _check(int(spec.N) >= 1, "classical.N", "must be >= 1")
        return spec


@dataclass(frozen=True)
class ValidationSpec:
    l: tuple = (0, 1, 2)
    min_count: int = 10
    N_O: int = 2000
    swap: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationSpec":
        _known(d, set(cls.__dataclass_fields__), "validation.")
        d = dict(d)
        if "l" in d:
            d["l"] = tuple(int(v) for v in d["l"])
        spec = cls(**d)
        _check(all(v >= 0 for v in spec.l), "validation.l", "must be non-negative")
        _check(spec.N_O >= 1, "validation.N_O", "must be >= 1")
        return spec


@dataclass(frozen=True)
class ExperimentConfig:
    M: int
    M_prime: int
    epsilon: float
    eta: float
    detector: dict
    r: float | None = None
    n_ph: float | None = None
    unitary_seed: int = 0
    seed: int = 0
    threads: int | None = None
    estimator: EstimatorSpec = field(default_factory=EstimatorSpec)
    classical: ClassicalSpec = field(default_factory=ClassicalSpec)
    validation: ValidationSpec = field(default_factory=ValidationSpec)
    pattern: tuple | None = None
    output: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "configuration must be a JSON object")
        _known(d, set(cls.__dataclass_fields__), "")
        for name in ("M", "M_prime", "epsilon", "eta", "detector"):
            _check(name in d, name, "missing required field")
        _check(("r" in d and d["r"] is not None) != ("n_ph" in d and d["n_ph"] is not None),
               "r", "give exactly one of r and n_ph")
        d = dict(d)
        d["estimator"] = EstimatorSpec.from_dict(d.get("estimator", {}))
        d["classical"] = ClassicalSpec.from_dict(d.get("classical", {}))
        d["validation"] = ValidationSpec.from_dict(d.get("validation", {}))
        if d.get("pattern") is not None:
            d["pattern"] = tuple(int(v) for v in d["pattern"])
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        _check(isinstance(self.M, int) and self.M >= 1, "M", "must be a positive integer")
        _check(isinstance(self.M_prime, int) and 0 <= self.M_prime <= self.M, "M_prime", "must lie in [0, M]")
        _check(0.0 <= self.epsilon <= 1.0, "epsilon", "must lie in [0, 1]")
        _check(0.0 < self.eta <= 1.0, "eta", "must lie in (0, 1]")
        if self.r is not None:
            _check(self.r >= 0, "r", "must be non-negative")
        if self.n_ph is not None:
            _check(self.n_ph >= 0, "n_ph", "must be non-negative")
        if self.threads is not None:
            _check(self.threads >= 1, "threads", "must be >= 1")
        if self.pattern is not None:
            _check(len(self.pattern) == self.M, "pattern", f"must have M={self.M} entries")
            _check(all(v >= 0 for v in self.pattern), "pattern", "counts must be non-negative")
        try:
            detector_from_spec(self.detector)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("detector", str(exc)) from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["validation"]["l"] = list(self.validation.l)
        if self.pattern is not None:
            d["pattern"] = list(self.pattern)
        return {k: v for k, v in d.items() if v is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form (thread count and output path excluded)."""
        d = self.to_dict()
        d.pop("threads", None)
        d.pop("output", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True, separators=(",", ":")).encode()).hexdigest()

    @property
    def squeezing(self) -> float:
        if self.r is not None:
            return float(self.r)
        return solve_squeezing(self.n_ph, self.M_prime, self.eta)

    def make_detector(self) -> DetectorModel:
        return detector_from_spec(self.detector)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}", exc.msg) from exc
    except OSError as exc:
        raise ConfigError(str(path), exc.strerror or str(exc)) from exc
    try:
        return ExperimentConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError("<root>", str(exc)) from exc
