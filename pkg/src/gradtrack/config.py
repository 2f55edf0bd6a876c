"""Experiment configuration: flat JSON with three independent seeds.

``graph_seed``, ``data_seed``, and ``init_seed`` isolate the sources of
randomness (topology, objective data, initial condition) so each can be
varied alone. Every field is a plain scalar except ``algorithms``, a list of
``{"name": ..., "eta": ... or "eta_mode": ...}`` entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .bounds import ETA_MODES

GRAPH_MODELS = ("erdos_renyi", "random_regular", "path", "complete")
WEIGHT_METHODS = ("laplacian", "lazy_metropolis")
ALGORITHM_NAMES = ("gt", "dgd_fixed", "dgd_vanishing", "cgd")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    eta: float | None = None
    eta_mode: str | None = None

    def __post_init__(self) -> None:
        if self.name not in ALGORITHM_NAMES:
            raise ConfigError(f"unknown algorithm {self.name!r}")
        if self.eta is not None and self.eta <= 0:
            raise ConfigError(f"algorithm {self.name}: eta must be positive")
        if self.eta is not None and self.eta_mode is not None:
            raise ConfigError(f"algorithm {self.name}: give eta or eta_mode, not both")
        if self.eta_mode is not None and self.eta_mode not in ETA_MODES:
            raise ConfigError(f"algorithm {self.name}: unknown eta_mode {self.eta_mode!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    graph_model: str
    graph_n: int
    graph_seed: int
    data_seed: int
    init_seed: int
    graph_p: float | None = None
    graph_d: int | None = None
    weights: str = "laplacian"
    case: int = 1
    samples: int = 20
    dim: int = 5
    rounds: int = 10_000
    algorithms: tuple[AlgorithmSpec, ...] = field(default_factory=tuple)
    target_error: float | None = None
    sizes: tuple[int, ...] | None = None
    max_rounds: int | None = None
    upper_n: int | None = None
    alpha: float | None = None
    beta: float | None = None
    sigma: float | None = None
    eta: float | None = None

    def __post_init__(self) -> None:
        if self.graph_model not in GRAPH_MODELS:
            raise ConfigError(f"unknown graph model {self.graph_model!r}")
        if self.graph_n < 1:
            raise ConfigError("graph_n must be positive")
        if self.graph_model == "erdos_renyi":
            if self.graph_p is None or not 0 < self.graph_p <= 1:
                raise ConfigError("erdos_renyi needs graph_p in (0, 1]")
        if self.graph_model == "random_regular" and self.graph_d is None:
            raise ConfigError("random_regular needs graph_d")
        if self.weights not in WEIGHT_METHODS:
            raise ConfigError(f"unknown weight method {self.weights!r}")
        if self.case not in (1, 2, 3):
            raise ConfigError(f"objective case must be 1, 2, or 3, got {self.case}")
        if min(self.samples, self.dim) < 1:
            raise ConfigError("samples and dim must be positive")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        for seed in (self.graph_seed, self.data_seed, self.init_seed):
            if seed < 0:
                raise ConfigError("seeds must be nonnegative")
        if self.target_error is not None and self.target_error <= 0:
            raise ConfigError("target_error must be positive")
        if self.upper_n is not None and self.upper_n < self.graph_n:
            raise ConfigError("upper_n must be at least graph_n")
        for spec in self.algorithms:
            self._check_mode_compat(spec)

    def _check_mode_compat(self, spec: AlgorithmSpec) -> None:
        mode = spec.eta_mode
        if mode is None:
            return
        if mode in ("strongly_convex", "metropolis_strongly_convex") and self.case != 1:
            raise ConfigError(
                f"eta_mode {mode!r} needs per-agent strong convexity (case 1), "
                f"got case {self.case}"
            )
        if mode.startswith("metropolis") and self.weights != "lazy_metropolis":
            raise ConfigError(f"eta_mode {mode!r} requires lazy_metropolis weights")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        raw_algos = doc.pop("algorithms", [])
        if not isinstance(raw_algos, list):
            raise ConfigError("algorithms must be a list")
        algos = []
        for entry in raw_algos:
            if isinstance(entry, str):
                entry = {"name": entry}
            if not isinstance(entry, dict) or "name" not in entry:
                raise ConfigError(f"bad algorithm entry {entry!r}")
            unknown = set(entry) - {"name", "eta", "eta_mode"}
            if unknown:
                raise ConfigError(f"unknown algorithm keys {sorted(unknown)}")
            algos.append(AlgorithmSpec(**entry))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "sizes" in doc and doc["sizes"] is not None:
            doc["sizes"] = tuple(int(v) for v in doc["sizes"])
        try:
            return cls(algorithms=tuple(algos), **doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path, overrides: list[str] | None = None) -> ExperimentConfig:
    """Load a JSON config file, applying ``key=value`` seed overrides first."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    for item in overrides or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        if not key.endswith("_seed"):
            raise ConfigError(f"override {key!r} is not a seed field")
        try:
            doc[key] = int(value)
        except ValueError as exc:
            raise ConfigError(f"override {item!r} needs an integer value") from exc
    return ExperimentConfig.from_dict(doc)
