"""Validated configuration records shared by the CLI and the artifact writers."""

import math
from typing import Any, ClassVar, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.dobmodels import DobParams

LoopFamily = Literal[
    "inner-continuous",
    "inner-discrete",
    "outer-continuous",
    "outer-discrete",
    "observer-probe",
]
SignalKind = Literal["none", "step", "ramp", "sinusoid"]


def _float_list(value: Any) -> Any:
    if isinstance(value, str):
        items = [item.strip() for item in value.split(",")]
        return [float(item) for item in items if item]
    return value


class GridSection(BaseModel):
    """Parameter grids and analysis settings.

    Observer bandwidths come either from ``g_values`` or from the
    ``g_start``/``g_stop``/``g_step`` range. Omitted grids fall back to the
    single value in ``[params]``.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    family: LoopFamily = "inner-discrete"
    g_values: list[float] | None = None
    g_start: float | None = Field(default=None, ge=0)
    g_stop: float | None = Field(default=None, ge=0)
    g_step: float | None = Field(default=None, gt=0)
    alphas: list[float] | None = None
    sample_times: list[float] | None = None
    points: int = Field(default=2000, gt=0)
    omega_min: float | None = Field(default=None, gt=0)
    omega_max: float | None = Field(default=None, gt=0)
    bracket_low: float | None = Field(default=None, ge=0)
    bracket_high: float | None = Field(default=None, gt=0)
    refinement: int = Field(default=1, ge=1)
    full_interval: bool = False

    @field_validator("g_values", "alphas", "sample_times", mode="before")
    @classmethod
    def _split_lists(cls, value: Any) -> Any:
        return _float_list(value)

    @field_validator("g_values", "alphas", "sample_times")
    @classmethod
    def _non_empty(cls, value: list[float] | None) -> list[float] | None:
        if value is not None and not value:
            raise ValueError("grid is empty")
        return value

    @model_validator(mode="after")
    def _check_range(self) -> "GridSection":
        ranged = (self.g_start, self.g_stop, self.g_step)
        if any(v is not None for v in ranged):
            if self.g_values is not None:
                raise ValueError("give g_values or a g_start/g_stop/g_step range")
            if any(v is None for v in ranged):
                raise ValueError("a bandwidth range needs g_start, g_stop and g_step")
            if self.g_stop < self.g_start:  # type: ignore[operator]
                raise ValueError("g_stop is below g_start")
        if (self.bracket_low is None) != (self.bracket_high is None):
            raise ValueError("bracket_low and bracket_high go together")
        return self

    def g_grid(self, default: float) -> list[float]:
        if self.g_values is not None:
            return list(self.g_values)
        if self.g_start is None or self.g_stop is None or self.g_step is None:
            return [default]
        count = math.floor((self.g_stop - self.g_start) / self.g_step + 1e-9) + 1
        return [self.g_start + i * self.g_step for i in range(count)]

    @property
    def bracket(self) -> tuple[float, float] | None:
        if self.bracket_low is None or self.bracket_high is None:
            return None
        return self.bracket_low, self.bracket_high


class ScenarioSection(BaseModel):
    """Flat form of a simulation scenario."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    duration: float = Field(default=1.0, gt=0)
    reference_kind: SignalKind = "step"
    reference_amplitude: float = 1.0
    reference_onset: float = Field(default=0.0, ge=0)
    reference_frequency: float = Field(default=0.0, ge=0)
    disturbance_kind: SignalKind = "none"
    disturbance_amplitude: float = 0.0
    disturbance_onset: float = Field(default=0.0, ge=0)
    disturbance_frequency: float = Field(default=0.0, ge=0)
    noise_std: float = Field(default=0.0, ge=0)
    noise_seed: int = 0
    divergence_bound: float | None = Field(default=None, gt=0)
    observer_scheme: Literal["implicit", "explicit"] = "implicit"
    encoder_noise_std: float = Field(default=0.0, ge=0)


class OutputSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    prefix: str | None = Field(default=None, pattern=r"^[A-Za-z0-9._-]+$")


class RunConfig(BaseModel):
    """Fully resolved run configuration: file values, overrides and defaults."""

    model_config = ConfigDict(frozen=True)

    params: DobParams
    grid: GridSection = GridSection()
    scenario: ScenarioSection = ScenarioSection()
    output: OutputSection = OutputSection()

    SECTIONS: ClassVar[tuple[str, ...]] = ("params", "grid", "scenario", "output")

    def to_ini_lines(self) -> list[str]:
        """Canonical INI rendering; parsing it back yields an equal config."""
        lines: list[str] = []
        for name in self.SECTIONS:
            section: BaseModel = getattr(self, name)
            lines.append(f"[{name}]")
            for key, value in section.model_dump().items():
                if value is not None:
                    lines.append(f"{key} = {_render(value)}")
        return lines


def _render(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(_render(v) for v in value)
    return str(value)
