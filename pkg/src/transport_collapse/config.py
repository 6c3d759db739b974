"""Experiment configuration: strict validation and YAML round trip."""
from __future__ import annotations

from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .fluxes import HomogeneousFlux, InhomogeneousFlux
from .kinetic import ScalarField, SpatialGrid, VelocityGrid
from .oracles import riemann_field
from .paths import PATH_KINDS, PathSpec

DEFAULT_CELLS = 256


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists ``(field path, message)`` pairs."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        super().__init__("; ".join(f"{loc}: {msg}" for loc, msg in errors))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class FluxConfig(_Strict):
    preset: Literal["burgers", "linear", "sine-speed-inhomogeneous", "polynomial"] = "burgers"
    coefficients: Optional[list[float]] = None
    speed: float = 1.0
    spatial: Literal["none", "sine"] = "none"
    amplitude: float = Field(0.5, ge=0.0, lt=1.0)
    wavenumber: float = 1.0

    @model_validator(mode="after")
    def _coefficients_for_polynomial(self):
        if self.preset == "polynomial" and not self.coefficients:
            raise ValueError("preset 'polynomial' needs coefficients")
        return self

    @property
    def inhomogeneous(self) -> bool:
        return self.preset == "sine-speed-inhomogeneous" or self.spatial != "none"

    def build(self, dimension: int):
        if self.preset == "sine-speed-inhomogeneous":
            return InhomogeneousFlux.sine_speed(self.amplitude, self.wavenumber, dimension)
        if self.preset == "burgers":
            coef = [0.0, 0.0, 0.5]
        elif self.preset == "linear":
            coef = [0.0, self.speed]
        else:
            coef = list(self.coefficients)
        if self.spatial == "none":
            return HomogeneousFlux.polynomial(*([coef] * dimension), name=self.preset)
        amp, k = self.amplitude, self.wavenumber
        V = lambda x: 1.0 + amp * np.sin(k * x)
        dV = lambda x: amp * k * np.cos(k * x)
        return InhomogeneousFlux.separable([V] * dimension, [dV] * dimension, [coef] * dimension, name=f"{self.preset}-sine")


class InitialConfig(_Strict):
    kind: Literal["riemann", "bump", "sine"] = "bump"
    u_l: float = 1.0
    u_r: float = 0.0
    x0: float = 1.0
    center: float = 0.5
    width: float = Field(1.0, gt=0.0)
    height: float = 1.0
    amplitude: float = 1.0

    def build(self, grid: SpatialGrid) -> ScalarField:
        if self.kind == "riemann":
            if grid.dimension != 1:
                raise ValueError("riemann data is one-dimensional")
            return riemann_field(grid, self.u_l, self.u_r, self.x0)
        factors = []
        for ax in range(grid.dimension):
            e = grid.edges(ax)
            if self.kind == "bump":
                lo, hi = self.center - 0.5 * self.width, self.center + 0.5 * self.width
                factors.append(np.diff(np.clip(e, lo, hi)) / grid.dx[ax])
            else:
                w = 2 * np.pi / grid.length[ax]
                factors.append(-np.diff(np.cos(w * (e - grid.origin[ax]))) / (w * grid.dx[ax]))
        scale = self.height if self.kind == "bump" else self.amplitude
        vals = factors[0] if grid.dimension == 1 else np.multiply.outer(factors[0], factors[1])
        return ScalarField(grid, scale * vals)


class PathConfig(_Strict):
    kind: Literal[PATH_KINDS] = "deterministic"  # type: ignore[valid-type]
    slope: list[float] = Field(default_factory=lambda: [1.0])
    period: float = Field(0.25, gt=0.0)
    amplitude: float = 0.1
    seed: Optional[int] = None
    oversample: int = Field(16, ge=1)
    hurst: float = Field(0.5, gt=0.0, lt=1.0)

    def spec(self, dimension: int, default_seed: int) -> PathSpec:
        slope = self.slope if len(self.slope) == dimension else [self.slope[0]] * dimension
        return PathSpec(
            self.kind, tuple(slope), self.period, self.amplitude,
            default_seed if self.seed is None else self.seed, self.oversample, self.hurst, dimension,
        )


class GridConfig(_Strict):
    dimension: Literal[1, 2] = 1
    nx: int = Field(DEFAULT_CELLS, gt=0)
    n_xi: int = Field(DEFAULT_CELLS, gt=0)
    length: float = Field(2.0, gt=0.0)
    origin: float = 0.0
    xi_min: Optional[float] = None
    xi_max: Optional[float] = None

    @model_validator(mode="after")
    def _xi_bounds(self):
        if (self.xi_min is None) != (self.xi_max is None):
            raise ValueError("give both xi_min and xi_max or neither")
        if self.xi_min is not None and not self.xi_min < 0 < self.xi_max:
            raise ValueError("need xi_min < 0 < xi_max")
        return self

    def spatial(self) -> SpatialGrid:
        d = self.dimension
        return SpatialGrid((self.nx,) * d, (self.length,) * d, (self.origin,) * d)

    def velocity(self, u0: ScalarField, margin: float = 1.0) -> VelocityGrid:
        if self.xi_min is not None:
            return VelocityGrid(self.xi_min, self.xi_max, self.n_xi)
        if self.n_xi % 2:
            raise ValueError("automatic xi bounds need an even n_xi")
        bound = max(u0.norm(np.inf), 1e-3) * margin
        return VelocityGrid.symmetric(bound, self.n_xi)


class TimeConfig(_Strict):
    T: float = Field(0.5, gt=0.0)
    dts: list[float] = Field(default_factory=lambda: [0.02, 0.01, 0.005, 0.0025])
    reference_dt: Optional[float] = None
    snapshot_times: list[float] = Field(default_factory=list)

    @field_validator("dts")
    @classmethod
    def _positive(cls, v):
        if not v or any(d <= 0 for d in v):
            raise ValueError("dts must be a nonempty list of positive steps")
        return v

    @model_validator(mode="after")
    def _nested(self):
        for dt in self.dts + ([self.reference_dt] if self.reference_dt else []):
            K = round(self.T / dt)
            if K < 1 or abs(K * dt - self.T) > 1e-9 * self.T:
                raise ValueError(f"dt = {dt} does not divide T = {self.T}")
        if self.reference_dt is not None:
            for dt in self.dts:
                r = dt / self.reference_dt
                if abs(r - round(r)) > 1e-9 or round(r) < 1:
                    raise ValueError(f"reference_dt {self.reference_dt} does not nest in dt {dt}")
        for t in self.snapshot_times:
            if not 0 <= t <= self.T:
                raise ValueError(f"snapshot time {t} outside [0, {self.T}]")
            for dt in self.dts:
                k = round(t / dt)
                if abs(k * dt - t) > 1e-9 * self.T:
                    raise ValueError(f"snapshot time {t} is not a multiple of dt = {dt}")
        return self

    @property
    def reference(self) -> float:
        return self.reference_dt if self.reference_dt is not None else min(self.dts) / 4


class ExperimentConfig(_Strict):
    name: str = "experiment"
    flux: FluxConfig = Field(default_factory=FluxConfig)
    initial: InitialConfig = Field(default_factory=InitialConfig)
    path: PathConfig = Field(default_factory=PathConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    time: TimeConfig = Field(default_factory=TimeConfig)
    output_dir: str = "out"
    seed: int = 0
    integrator_step: float = Field(0.025, gt=0.0)
    velocity_margin: float = Field(1.5, ge=1.0)
    bound_variant: Literal["stated", "optimized", "max"] = "max"
    bgk_epsilon_factor: float = Field(0.01, gt=0.0)


def _errors(exc: ValidationError) -> list[tuple[str, str]]:
    return [(".".join(str(p) for p in e["loc"]) or "<root>", e["msg"]) for e in exc.errors()]


def config_from_dict(data: dict | None) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data or {})
    except ValidationError as exc:
        raise ConfigError(_errors(exc)) from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse a YAML (or JSON) document; unknown keys are rejected."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([("<document>", str(exc))]) from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError([("<document>", "top level must be a mapping")])
    return config_from_dict(data)


def serialize_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply ``dotted.key=value`` overrides; values are parsed as YAML scalars."""
    data = cfg.model_dump(mode="json")
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError([(item, "override must look like key=value")])
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                raise ConfigError([(key, "unknown section")])
            node = node[p]
        node[parts[-1]] = yaml.safe_load(raw)
    return config_from_dict(data)
