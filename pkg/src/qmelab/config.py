"""Run configuration: one JSON document validated by pydantic.

Every model forbids unknown keys. Complex numbers are ``[re, im]`` pairs.
The schema is documented in docs/CONFIG.md; configs/three_level.json is the
shipped example.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .const import DEFAULT_TOLERANCES, ErrorCode
from .errors import ConfigError
from .oracle import DEFAULT_DIM_CAP

ComplexPair = Tuple[float, float]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(_Model):
    start: float
    stop: float
    points: int = Field(ge=0)

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


class ThreeLevelPreset(_Model):
    center: float = Field(0.1, gt=0)
    coupling: float = 1.0
    delta0: Optional[float] = Field(None, gt=0)


class SystemConfig(_Model):
    energies: Optional[List[float]] = None
    couplings: Optional[List[List[ComplexPair]]] = None
    three_level: Optional[ThreeLevelPreset] = None
    allow_diagonal: bool = False

    @model_validator(mode="after")
    def _one_form(self) -> "SystemConfig":
        explicit = self.energies is not None or self.couplings is not None
        if explicit == (self.three_level is not None):
            raise ValueError("give either energies + couplings or the three_level preset, not both or neither")
        if explicit and (self.energies is None or self.couplings is None):
            raise ValueError("explicit systems need both energies and couplings")
        return self

    def coupling_matrix(self) -> np.ndarray:
        return np.array([[complex(re, im) for re, im in row] for row in self.couplings], dtype=np.complex128)


class SpectralDensityConfig(_Model):
    kind: Literal["ohmic_exp_cutoff", "flat_smooth_cutoff", "lorentzian_peak", "tabulated"] = "ohmic_exp_cutoff"
    eta: float = Field(1.0, ge=0)
    cutoff: float = Field(1.0, gt=0)
    omega_c: float = Field(0.25, gt=0)
    center: float = 0.5
    width: float = Field(0.1, gt=0)
    edge: float = Field(0.02, gt=0)
    table: Optional[List[Tuple[float, float]]] = None
    table_file: Optional[str] = None

    @model_validator(mode="after")
    def _table_source(self) -> "SpectralDensityConfig":
        if self.kind == "tabulated" and (self.table is None) == (self.table_file is None):
            raise ValueError("tabulated spectral density needs exactly one of table / table_file")
        return self


class BathConfig(_Model):
    beta: float = Field(gt=0)
    gamma: float = Field(1.0, ge=0)
    spectral_density: SpectralDensityConfig = SpectralDensityConfig()


class SchemeConfig(_Model):
    name: Literal["redfield", "secular", "symmetrized", "coarse_grained"]
    epsilon: Optional[float] = Field(None, gt=0)
    # epsilon = epsilon_scale / delta0 when the system carries a delta0
    epsilon_scale: Optional[float] = Field(None, gt=0)
    delta0: Optional[float] = Field(None, gt=0)
    lamb_shift: bool = True

    @model_validator(mode="after")
    def _epsilon_once(self) -> "SchemeConfig":
        if self.epsilon is not None and self.epsilon_scale is not None:
            raise ValueError("give epsilon or epsilon_scale, not both")
        return self


class CountingConfig(_Model):
    lambda_grid: Optional[GridSpec] = None
    chi_grid: Optional[GridSpec] = None
    ft_lambda_grid: Optional[GridSpec] = None


class InitialStateConfig(_Model):
    kind: Literal["gibbs", "pure", "excited_superposition"] = "excited_superposition"
    amplitudes: Optional[List[ComplexPair]] = None
    beta: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _amplitudes(self) -> "InitialStateConfig":
        if (self.kind == "pure") != (self.amplitudes is not None):
            raise ValueError("amplitudes are required for kind 'pure' and only allowed there")
        return self


class OracleConfig(_Model):
    enabled: bool = False
    N: int = Field(300, ge=2)
    seed: int = 0
    dim_cap: int = Field(DEFAULT_DIM_CAP, ge=4)
    kernel_width: float = Field(0.02, gt=0)
    times: Optional[GridSpec] = None


class OutputConfig(_Model):
    directory: str = "out"
    formats: List[Literal["csv", "json"]] = Field(default_factory=lambda: ["csv"], min_length=1)


class TolerancesConfig(_Model):
    gqdb: float = Field(DEFAULT_TOLERANCES["gqdb"], gt=0)
    strict_energy: float = Field(DEFAULT_TOLERANCES["strict_energy"], gt=0)
    average_first_law: float = Field(DEFAULT_TOLERANCES["average_first_law"], gt=0)
    gibbs_fixed_point: float = Field(DEFAULT_TOLERANCES["gibbs_fixed_point"], gt=0)
    steady_state: float = Field(DEFAULT_TOLERANCES["steady_state"], gt=0)
    ft_work: float = Field(DEFAULT_TOLERANCES["ft_work"], gt=0)
    ft_entropy: float = Field(DEFAULT_TOLERANCES["ft_entropy"], gt=0)
    first_law_heat: float = Field(DEFAULT_TOLERANCES["first_law_heat"], gt=0)


class RunConfig(_Model):
    system: SystemConfig
    baths: List[BathConfig] = Field(min_length=1)
    scheme: SchemeConfig
    counting: CountingConfig = CountingConfig()
    times: GridSpec = GridSpec(start=0.0, stop=50.0, points=21)
    ft_time: float = Field(10.0, ge=0)
    beta_S: float = Field(1.0, gt=0)
    initial_state: InitialStateConfig = InitialStateConfig()
    oracle: OracleConfig = OracleConfig()
    output: OutputConfig = OutputConfig()
    tolerances: TolerancesConfig = TolerancesConfig()
    workers: int = Field(1, ge=1)

    def with_overrides(self, *, out: Optional[Path] = None, seed: Optional[int] = None,
                       workers: Optional[int] = None) -> "RunConfig":
        update = {}
        if out is not None:
            update["output"] = self.output.model_copy(update={"directory": str(out)})
        if seed is not None:
            update["oracle"] = self.oracle.model_copy(update={"seed": seed})
        if workers is not None:
            if workers < 1:
                raise ConfigError(f"--workers must be >= 1, got {workers}")
            update["workers"] = workers
        return self.model_copy(update=update)


def _schema_message(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_config(data: object) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {_schema_message(exc)}", ErrorCode.E_CONFIG_SCHEMA) from exc


def load_config(path: Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", ErrorCode.E_CONFIG_SYNTAX) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})", ErrorCode.E_CONFIG_SYNTAX) from exc
    return parse_config(data)
