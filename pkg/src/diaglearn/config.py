"""Experiment configuration (JSON) and its validation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError
from .pauli import GeneratorSet, InteractingHamiltonian, PauliString, popcount


@dataclass(frozen=True)
class TrotterConfig:
    L: int | None = None
    L_grid: tuple[int, ...] = ()
    trials: int = 50
    seed: int | None = None


@dataclass(frozen=True)
class EstimationConfig:
    nu: int = 10_000
    repetitions: int = 200


@dataclass(frozen=True)
class BosonicConfig:
    m: int
    P: int


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    format: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    alpha: tuple[float, ...]
    t: float = 1.0
    n: int | None = None
    generators: tuple[str, ...] = ()
    theta: tuple[float, ...] | None = None
    interactions: tuple[tuple[str, float], ...] = ()
    columns: tuple[int, ...] | None = None
    trotter: TrotterConfig = field(default_factory=TrotterConfig)
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    bosonic: BosonicConfig | None = None
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def is_bosonic(self) -> bool:
        return self.bosonic is not None

    def generator_set(self) -> GeneratorSet:
        return GeneratorSet.parse(self.generators)

    def hamiltonian(self) -> InteractingHamiltonian:
        """Local fields from single-Z generators; other generators become diagonal couplings."""
        if self.theta is None:
            raise ConfigError("theta is required for simulation")
        gens = self.generator_set()
        local = [0.0] * gens.n
        extra = []
        for g, th in zip(gens, self.theta):
            if popcount(g.mask) == 1:
                local[g.mask.bit_length() - 1] = th
            else:
                extra.append((g.to_pauli(), th))
        inter = [(PauliString.parse(p), g) for p, g in self.interactions]
        try:
            return InteractingHamiltonian(gens.n, tuple(local), tuple(extra + inter))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def q_true(self) -> float:
        if self.theta is None:
            raise ConfigError("theta is required for simulation")
        return float(np.dot(self.alpha, self.theta))

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["interactions"] = [list(p) for p in self.interactions]
        d["trotter"]["L_grid"] = list(self.trotter.L_grid)
        for key in ("alpha", "generators", "theta", "columns"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _require(d: dict, key: str):
    if key not in d:
        raise ConfigError(f"missing required field {key!r}")
    return d[key]


def _sub(cls, d: dict | None, name: str):
    if d is None:
        return None
    if not isinstance(d, dict):
        raise ConfigError(f"{name} must be an object")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def parse_config(d: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    try:
        alpha = tuple(float(v) for v in _require(d, "alpha"))
        trotter = dict(d.get("trotter") or {})
        if "L_grid" in trotter:
            trotter["L_grid"] = tuple(int(v) for v in trotter["L_grid"])
        cfg = ExperimentConfig(
            alpha=alpha,
            t=float(d.get("t", 1.0)),
            n=d.get("n"),
            generators=tuple(d.get("generators") or ()),
            theta=None if d.get("theta") is None else tuple(float(v) for v in d["theta"]),
            interactions=tuple((str(p), float(g)) for p, g in d.get("interactions") or ()),
            columns=None if d.get("columns") is None else tuple(int(c) for c in d["columns"]),
            trotter=_sub(TrotterConfig, trotter, "trotter"),
            estimation=_sub(EstimationConfig, d.get("estimation") or {}, "estimation"),
            bosonic=_sub(BosonicConfig, d.get("bosonic"), "bosonic"),
            output=_sub(OutputConfig, d.get("output") or {}, "output"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config: {exc}") from None
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.t <= 0:
        raise ConfigError("t must be positive")
    if cfg.is_bosonic == bool(cfg.generators):
        raise ConfigError("exactly one of 'generators' (qubit) or 'bosonic' must be given")
    if cfg.is_bosonic:
        if cfg.bosonic.P < 1 or cfg.bosonic.m < 1:
            raise ConfigError("bosonic section needs m >= 1 and P >= 1")
        if len(cfg.alpha) != cfg.bosonic.m:
            raise ConfigError(f"alpha has {len(cfg.alpha)} entries for {cfg.bosonic.m} modes")
        return
    for i, g in enumerate(cfg.generators):
        try:
            GeneratorSet.parse([g])
        except ConfigError as exc:
            raise ConfigError(f"generators[{i}]: {exc}") from None
    gens = cfg.generator_set()
    if cfg.n is not None and cfg.n != gens.n:
        raise ConfigError(f"n={cfg.n} disagrees with generator length {gens.n}")
    if len(cfg.alpha) != gens.m:
        raise ConfigError(f"alpha has {len(cfg.alpha)} entries for {gens.m} generators")
    if cfg.theta is not None and len(cfg.theta) != gens.m:
        raise ConfigError(f"theta has {len(cfg.theta)} entries for {gens.m} generators")
    for i, (p, _) in enumerate(cfg.interactions):
        try:
            ps = PauliString.parse(p)
        except ConfigError as exc:
            raise ConfigError(f"interactions[{i}]: {exc}") from None
        if ps.n != gens.n:
            raise ConfigError(f"interactions[{i}]: {p!r} has length {ps.n}, expected {gens.n}")
    if cfg.output.format not in (None, "json", "csv"):
        raise ConfigError("output.format must be 'json' or 'csv'")
    if any(L <= 0 for L in cfg.trotter.L_grid) or (cfg.trotter.L is not None and cfg.trotter.L <= 0):
        raise ConfigError("Trotter step counts must be positive")


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(doc)
