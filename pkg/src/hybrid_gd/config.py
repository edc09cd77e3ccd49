"""Experiment configuration: parsing, validation and construction of run inputs."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .certificate import auto_tau_max
from .errors import ConfigError
from .hybrid import FixedReset, HybridState, SequenceReset, StopRule, TimerConfig, UniformReset
from .objective import BlockPartition, QuadraticObjective, SpectrumSpec, build_quadratic

CHECK_NAMES = (
    "structure",
    "timer",
    "contraction",
    "alignment",
    "jump_descent",
    "proposition",
    "theorem",
    "first_jump",
    "escape_growth",
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ObjectiveSpec(_Strict):
    n: int = Field(gt=0)
    eigenvalues: list[float] | None = None
    beta: float | None = Field(default=None, gt=0)
    K: float | None = Field(default=None, gt=0)
    spacing: Literal["linear"] = "linear"
    b_mode: Literal["random_1_5", "zero", "explicit"] = "random_1_5"
    b: list[float] | None = None

    @model_validator(mode="after")
    def _check(self) -> "ObjectiveSpec":
        has_list = self.eigenvalues is not None
        has_range = self.beta is not None or self.K is not None
        if has_list == has_range:
            raise ValueError("give either 'eigenvalues' or both 'beta' and 'K'")
        if has_list:
            if len(self.eigenvalues) != self.n:
                raise ValueError(f"'eigenvalues' needs {self.n} entries, got {len(self.eigenvalues)}")
            if min(self.eigenvalues) <= 0:
                raise ValueError("'eigenvalues' must be positive")
        else:
            if self.beta is None or self.K is None:
                raise ValueError("'beta' and 'K' must be given together")
            if self.beta > self.K:
                raise ValueError("'beta' must not exceed 'K'")
            if self.n == 1 and self.beta != self.K:
                raise ValueError("n=1 requires beta == K")
        if self.b_mode == "explicit":
            if self.b is None or len(self.b) != self.n:
                raise ValueError(f"b_mode 'explicit' needs 'b' with {self.n} entries")
        elif self.b is not None:
            raise ValueError("'b' is only allowed with b_mode 'explicit'")
        return self


class PartitionSpec(_Strict):
    N: int | None = Field(default=None, gt=0)
    sizes: Union[Literal["auto"], list[int]] = "auto"


class ResetSpec(_Strict):
    kind: Literal["fixed", "uniform", "sequence"] = "fixed"
    value: float | None = None
    seed: int | None = Field(default=None, ge=0, lt=2**64)
    values: list[float] | None = None

    @model_validator(mode="after")
    def _check(self) -> "ResetSpec":
        if self.kind == "sequence" and not self.values:
            raise ValueError("reset kind 'sequence' needs non-empty 'values'")
        if self.kind != "sequence" and self.values is not None:
            raise ValueError("'values' is only allowed with reset kind 'sequence'")
        if self.kind != "fixed" and self.value is not None:
            raise ValueError("'value' is only allowed with reset kind 'fixed'")
        if self.kind != "uniform" and self.seed is not None:
            raise ValueError("'seed' is only allowed with reset kind 'uniform'")
        return self


class TimerSpec(_Strict):
    auto_paper: bool = False
    tau_min: float | None = Field(default=None, gt=0)
    tau_max: float | None = Field(default=None, gt=0)
    reset_policy: ResetSpec = Field(default_factory=ResetSpec)

    @model_validator(mode="after")
    def _check(self) -> "TimerSpec":
        explicit = self.tau_min is not None or self.tau_max is not None
        if self.auto_paper and explicit:
            raise ValueError("'auto_paper' excludes explicit 'tau_min'/'tau_max'")
        if not self.auto_paper and (self.tau_min is None or self.tau_max is None):
            raise ValueError("give 'tau_min' and 'tau_max', or set 'auto_paper': true")
        return self


VectorInit = Union[Literal["all_twos", "at_minimizer"], list[float]]


class InitSpec(_Strict):
    z1: VectorInit = "all_twos"
    z2: VectorInit = "all_twos"
    tau0: float | None = Field(default=None, ge=0)


class StopSpec(_Strict):
    max_time: float | None = Field(default=None, ge=0)
    max_jumps: int | None = Field(default=None, ge=0)
    tolerance: float | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "StopSpec":
        if self.max_time is None and self.max_jumps is None and self.tolerance is None:
            raise ValueError("give at least one of 'max_time', 'max_jumps', 'tolerance'")
        return self


class ExperimentConfig(_Strict):
    name: str = "run"
    preset: str | None = None
    objective: ObjectiveSpec
    partition: PartitionSpec = Field(default_factory=PartitionSpec)
    timer: TimerSpec = Field(default_factory=lambda: TimerSpec(auto_paper=True))
    init: InitSpec = Field(default_factory=InitSpec)
    stop: StopSpec
    sample_interval: float | None = Field(default=None, gt=0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    checks: Union[Literal["all", "none"], list[str]] = "all"
    output_dir: str | None = None

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if isinstance(self.checks, list):
            unknown = sorted(set(self.checks) - set(CHECK_NAMES))
            if unknown:
                raise ValueError(f"unknown checks {unknown}; known: {list(CHECK_NAMES)}")
        n = self.objective.n
        sizes = self.partition.sizes
        if sizes != "auto":
            if sum(sizes) != n or min(sizes) < 1:
                raise ValueError(f"partition sizes {sizes} must be positive and sum to n={n}")
            if self.partition.N is not None and self.partition.N != len(sizes):
                raise ValueError("partition 'N' disagrees with the number of 'sizes'")
        elif self.partition.N is not None and self.partition.N > n:
            raise ValueError(f"partition N={self.partition.N} exceeds n={n}")
        for key in ("z1", "z2"):
            v = getattr(self.init, key)
            if isinstance(v, list) and len(v) != n:
                raise ValueError(f"init '{key}' needs {n} entries, got {len(v)}")
        return self

    def requested_checks(self) -> list[str]:
        if self.checks == "all":
            return list(CHECK_NAMES)
        if self.checks == "none":
            return []
        return [c for c in CHECK_NAMES if c in self.checks]

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)


def parse_config(text: str) -> ExperimentConfig:
    """Parse JSON text; all failures surface as :class:`ConfigError`."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def config_from_dict(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        parts = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            parts.append(f"{loc}: {err['msg']}")
        raise ConfigError("invalid config: " + "; ".join(parts)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# Construction of simulator inputs


def build_objective(cfg: ExperimentConfig) -> QuadraticObjective:
    spec = cfg.objective
    if spec.eigenvalues is not None:
        spectrum = SpectrumSpec(spec.n, tuple(sorted(spec.eigenvalues)), cfg.seed)
    else:
        spectrum = SpectrumSpec.linear(spec.n, spec.beta, spec.K, cfg.seed)
    if spec.b_mode == "zero":
        b = np.zeros(spec.n)
    elif spec.b_mode == "explicit":
        b = np.asarray(spec.b, dtype=np.float64)
    else:
        b = None
    return build_quadratic(spectrum, b)


def build_partition(cfg: ExperimentConfig) -> BlockPartition:
    n = cfg.objective.n
    if cfg.partition.sizes == "auto":
        return BlockPartition.contiguous(n, cfg.partition.N or n)
    return BlockPartition(tuple(cfg.partition.sizes))


def build_timer(cfg: ExperimentConfig, obj: QuadraticObjective) -> TimerConfig:
    spec = cfg.timer
    if spec.auto_paper:
        tau_max = auto_tau_max(obj.beta, obj.K)
        tau_min = tau_max / 2.0
    else:
        tau_min, tau_max = spec.tau_min, spec.tau_max
    r = spec.reset_policy
    if r.kind == "fixed":
        policy = FixedReset(r.value)
    elif r.kind == "uniform":
        policy = UniformReset(r.seed)
    else:
        policy = SequenceReset(tuple(r.values))
    return TimerConfig(tau_min, tau_max, policy)


def _init_vector(v: VectorInit, obj: QuadraticObjective) -> np.ndarray:
    if v == "all_twos":
        return np.full(obj.n, 2.0)
    if v == "at_minimizer":
        return obj.x_star.copy()
    return np.asarray(v, dtype=np.float64)


def build_init(cfg: ExperimentConfig, obj: QuadraticObjective, timer: TimerConfig) -> HybridState:
    tau0 = timer.tau_max if cfg.init.tau0 is None else cfg.init.tau0
    if tau0 > timer.tau_max:
        raise ConfigError(f"init.tau0={tau0} exceeds tau_max={timer.tau_max}")
    return HybridState(_init_vector(cfg.init.z1, obj), _init_vector(cfg.init.z2, obj), tau0)


def build_stop(cfg: ExperimentConfig) -> StopRule:
    s = cfg.stop
    return StopRule(s.max_time, s.max_jumps, s.tolerance)
