"""Scenario configuration: a flat TOML file or an embedded preset."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..process import (
    GeneratorMatrix,
    PiecewisePolynomialRate,
    RateTable,
    path_generator,
    random_generator,
    ssrw_generator,
    validate_generator,
)
from ..resurrection import RebirthMeasure


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    name: str
    model: str = "ctmc"
    # chain models
    generator: str = "explicit"
    q: Optional[list] = None
    labels: Optional[list] = None
    truncation: Optional[int] = None
    n_states: Optional[int] = None
    generator_seed: int = 0
    kappa: Union[float, list, None] = None
    kappa_states: Optional[list] = None
    kappa_default: float = 0.0
    mu: Union[str, list, int, None] = None
    # ray model
    kappa_pieces: Optional[list] = None
    x0: float = 0.0
    window: float = 1.0
    bin_width: float = 0.05
    x_max: Optional[float] = None
    # run
    n_kills: int = 100_000
    n_regen_cycles: int = 10_000
    seed: int = 0
    out_dir: Optional[str] = None
    # checks
    alpha: float = 1e-3
    tv_exit_tol: float = 0.01
    tv_reweight_tol: float = 0.02
    expect_infinite_mean: bool = False
    epsilon: Optional[float] = None
    time_bins: int = 4
    location_bins: int = 5
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls) if not f.name.startswith("_")}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "name" not in data:
            raise ConfigError("config needs a name")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def replace(self, **changes) -> "ScenarioConfig":
        cfg = dataclasses.replace(self, _cache={}, **changes)
        cfg.validate()
        return cfg

    def validate(self):
        if self.model not in ("ctmc", "ray"):
            raise ConfigError(f"model must be 'ctmc' or 'ray', got {self.model!r}")
        if self.n_kills < 1 or self.n_regen_cycles < 1:
            raise ConfigError("n_kills and n_regen_cycles must be >= 1")
        if self.model == "ctmc":
            Q = self.generator_matrix()
            check = validate_generator(Q)
            if not check:
                raise ConfigError(f"invalid generator: {check.message}")
            self.rate(Q)
            if self.mu != "qsd":
                self.rebirth(Q)
        else:
            if self.kappa_pieces is None:
                raise ConfigError("ray model needs kappa_pieces")
            self.ray_rate()
            if self.x0 < 0:
                raise ConfigError("x0 must be >= 0")

    def generator_matrix(self) -> GeneratorMatrix:
        if "Q" in self._cache:
            return self._cache["Q"]
        kind = self.generator
        if kind == "explicit":
            if self.q is None:
                raise ConfigError("explicit generator needs q")
            Q = GeneratorMatrix(np.array(self.q, dtype=float), labels=self.labels)
        elif kind == "ssrw":
            if not self.truncation or self.truncation < 1:
                raise ConfigError("ssrw generator needs truncation >= 1")
            Q = ssrw_generator(-self.truncation, self.truncation)
        elif kind == "path":
            Q = path_generator(self._need_states())
        elif kind == "random":
            Q = random_generator(self._need_states(), np.random.default_rng(self.generator_seed))
        else:
            raise ConfigError(f"unknown generator kind {kind!r}")
        self._cache["Q"] = Q
        return Q

    def _need_states(self) -> int:
        if not self.n_states or self.n_states < 2:
            raise ConfigError(f"{self.generator} generator needs n_states >= 2")
        return self.n_states

    def rate(self, Q: GeneratorMatrix) -> RateTable:
        if self.kappa_states is not None:
            values = np.full(Q.n, float(self.kappa_default))
            for label, rate in self.kappa_states:
                values[self._index(Q, label)] = rate
            return RateTable.on(Q, values)
        if self.kappa is None:
            raise ConfigError("chain model needs kappa or kappa_states")
        k = np.asarray(self.kappa, dtype=float)
        if k.ndim == 1 and k.size != Q.n:
            raise ConfigError(f"kappa has {k.size} entries for {Q.n} states")
        return RateTable.on(Q, k)

    @staticmethod
    def _index(Q, label):
        if int(label) not in Q.labels:
            raise ConfigError(f"state {label} is outside the chain")
        return Q.index_of(label)

    def rebirth(self, Q: GeneratorMatrix) -> RebirthMeasure:
        mu = self.mu
        if mu is None:
            raise ConfigError("chain model needs mu")
        if mu == "qsd":
            raise ConfigError("mu = 'qsd' must be resolved by the qsd pipeline")
        if isinstance(mu, int):
            mu = [[mu, 1.0]]
        support = [int(l) for l, _ in mu]
        for l in support:
            self._index(Q, l)
        weights = np.array([w for _, w in mu], dtype=float)
        return RebirthMeasure(np.array(support), weights / weights.sum())

    def ray_rate(self) -> PiecewisePolynomialRate:
        try:
            breakpoints = [float(b) for b, _ in self.kappa_pieces]
            coefficients = [list(c) for _, c in self.kappa_pieces]
            return PiecewisePolynomialRate(breakpoints, coefficients)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad kappa_pieces: {exc}") from exc


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    with open(path, "rb") as fh:
        data: dict[str, Any] = tomllib.load(fh)
    return ScenarioConfig.from_dict(data)
