"""JSON run configuration; unknown keys are rejected."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RuleConfig(_Strict):
    kind: Literal["threshold", "quantile", "general_mid"] = "threshold"
    delta: float = Field(0.0, ge=0)
    delta_q: float = Field(0.0, ge=0, le=0.5)
    p_mid: float = Field(0.5, ge=0, le=1)


class ConstraintsConfig(_Strict):
    mu: Optional[float] = Field(None, gt=0, lt=1)
    monotone: bool = False
    rho: Optional[float] = Field(None, ge=-1, le=1)


class SolverOverrides(_Strict):
    tol_grad: float = Field(1e-7, gt=0)
    tol_step: float = Field(1e-10, gt=0)
    max_iter: int = Field(5000, gt=0)
    dykstra_max: int = Field(500, gt=0)
    dykstra_tol: float = Field(1e-10, gt=0)
    armijo_c: float = Field(1e-4, gt=0, lt=1)
    armijo_shrink: float = Field(0.5, gt=0, lt=1)
    criterion: Literal["D", "A"] = "D"
    projection: Literal["exact", "dykstra"] = "exact"


class StandardizeConfig(_Strict):
    center_scale: bool = False
    add_squares: bool = False


class GridConfig(_Strict):
    min: float = Field(0.0, ge=0)
    max: float = Field(3.0, ge=0)
    count: int = Field(31, ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.count > 1 and not self.max > self.min:
            raise ValueError("delta_grid.max must exceed delta_grid.min")
        return self


class AssignConfig(_Strict):
    probs: Optional[str] = None
    mode: Literal["independent", "stratified"] = "independent"
    stratum_size: Optional[int] = Field(None, gt=0)


class SimulateConfig(_Strict):
    scenario: Optional[Literal["builtin"]] = "builtin"
    sigma: Optional[list[list[float]]] = None
    eta: Optional[list[float]] = None
    n: int = Field(500, gt=1)

    @model_validator(mode="after")
    def _complete(self):
        if self.scenario is None and (self.sigma is None or self.eta is None):
            raise ValueError("simulate needs scenario 'builtin' or both sigma and eta")
        return self


class RunConfig(_Strict):
    eta: Union[list[float], str, None] = None
    rule: RuleConfig = RuleConfig()
    constraints: ConstraintsConfig = ConstraintsConfig()
    solver: SolverOverrides = SolverOverrides()
    standardize: StandardizeConfig = StandardizeConfig()
    seed: int = 0
    delta_grid: GridConfig = GridConfig()
    center: bool = True
    svg: bool = False
    assign: AssignConfig = AssignConfig()
    simulate: Optional[SimulateConfig] = None

    @field_validator("eta")
    @classmethod
    def _eta(cls, v):
        if isinstance(v, str) and v != "preset:mimic-table1":
            raise ValueError("eta must be a list of numbers or 'preset:mimic-table1'")
        return v


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
