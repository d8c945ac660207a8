"""
Experiment protocol configuration and sampled results.
"""
from typing import Literal, Optional

from pydantic import Field, field_validator, model_validator

from conflictgrid.core.config import settings
from conflictgrid.schemas.base import BaseSchema
from conflictgrid.schemas.grid import DEFAULT_MAGNITUDES, GridSpec
from conflictgrid.schemas.indicator import IndicatorConfig, IndicatorKind
from conflictgrid.schemas.sensor import SensorKind, SensorModelParams
from conflictgrid.schemas.world import AnomalyParams, Environment, Scenario, default_hallways


def _default_seeds() -> list[int]:
    return [settings.DEFAULT_SEED + i for i in range(5)]


def _default_sensor_params() -> dict[SensorKind, SensorModelParams]:
    return {
        SensorKind.SONAR: SensorModelParams.sonar(),
        SensorKind.LASER: SensorModelParams.laser(),
    }


class ExperimentConfig(BaseSchema):
    """
    The full protocol. Defaults reproduce 3 hallways x 5 runs x 2 sensors,
    sampled every half meter from 1.0 m, over all 355 indicator configurations.
    """
    hallways: list[Environment] = Field(
        default_factory=default_hallways, min_length=1, description="Corridor definitions"
    )
    sensors: list[SensorKind] = Field(
        default_factory=lambda: [SensorKind.SONAR, SensorKind.LASER], min_length=1
    )
    sensor_params: dict[SensorKind, SensorModelParams] = Field(
        default_factory=_default_sensor_params, description="Cone model per sensor kind"
    )
    anomaly: AnomalyParams = Field(default_factory=AnomalyParams)
    seeds: list[int] = Field(
        default_factory=_default_seeds, min_length=1, description="One run per seed"
    )
    grid: GridSpec = Field(default_factory=GridSpec)
    step: float = Field(0.1, gt=0.0, description="meters between scans")
    run_length: float = Field(6.0, gt=0.0, description="meters per run")
    sample_start: float = Field(1.0, gt=0.0, description="distance of the first sample")
    sample_interval: float = Field(0.5, gt=0.0, description="meters between samples")
    sample_count: int = Field(10, ge=1)
    indicator_kinds: Optional[list[IndicatorKind]] = Field(
        None, description="Kinds to sweep; all when unset"
    )
    magnitudes: list[float] = Field(default_factory=lambda: list(DEFAULT_MAGNITUDES))
    classification_threshold: float = Field(
        300.0, ge=0.0, description="Error >= this is inaccurate"
    )
    designated_indicator: IndicatorConfig = Field(
        default_factory=lambda: IndicatorConfig(
            kind=IndicatorKind.GAMBINO, primary_threshold=2.0
        ),
        description="Config used for the FP/FN analysis",
    )
    delta2_c: float = Field(100.0, gt=0.0, description="Δ² distance cut-off, cells")
    delta2_domain: Literal["either", "full"] = Field(
        "either", description="Pixels summed over: highlighted in either image, or all"
    )
    kmeans_clusters: int = Field(3, ge=1)
    kmeans_seed: int = 0
    output_dir: str = Field(default_factory=lambda: settings.OUTPUT_DIR)
    workers: Optional[int] = Field(None, ge=1, description="Defaults to SWEEP_WORKERS")
    write_images: bool = Field(False, description="Write error images and conflict maps")
    write_logs: bool = Field(False, description="Write run logs as JSON lines")

    @field_validator("magnitudes")
    def validate_magnitudes(cls, v: list[float]) -> list[float]:
        if any(m <= 0 for m in v):
            raise ValueError("magnitudes must be positive")
        return sorted(set(v))

    @model_validator(mode="after")
    def check_protocol(self) -> "ExperimentConfig":
        distances = self.sample_distances
        if distances[-1] > self.run_length + 1e-9:
            raise ValueError(
                f"{self.sample_count} samples from {self.sample_start} m do not fit "
                f"in a {self.run_length} m run"
            )
        for kind in self.sensors:
            if kind not in self.sensor_params:
                raise ValueError(f"no sensor parameters for {kind.value}")
            if self.sensor_params[kind].kind != kind:
                raise ValueError(f"sensor_params[{kind.value}] describes another sensor")
        names = [env.name for env in self.hallways]
        if len(set(names)) != len(names):
            raise ValueError("hallway names must be unique")
        return self

    @property
    def sample_distances(self) -> list[float]:
        return [
            round(self.sample_start + i * self.sample_interval, 9)
            for i in range(self.sample_count)
        ]

    @property
    def effective_workers(self) -> int:
        return self.workers or settings.SWEEP_WORKERS

    def hallway(self, name: str) -> Environment:
        for env in self.hallways:
            if env.name == name:
                return env
        raise KeyError(name)

    def scenario(self, hallway: str, sensor: SensorKind) -> Scenario:
        return Scenario(
            environment=self.hallway(hallway),
            sensor=self.sensor_params[sensor],
            anomaly=self.anomaly,
            step=self.step,
            run_length=self.run_length,
        )


class SampleRecord(BaseSchema):
    """One indicator configuration evaluated at one sampled location of one run."""
    run_id: str
    hallway: str
    sensor: SensorKind
    seed: int
    sample_index: int = Field(..., ge=0)
    distance: float = Field(..., ge=0.0, description="meters traveled")
    indicator: str
    kind: IndicatorKind
    primary_threshold: float
    secondary_threshold: Optional[float] = None
    error: float = Field(..., ge=0.0)
    conflict_score: float = Field(..., ge=0.0)
    delta2: float = Field(..., ge=0.0)
    suspect_cells: int = Field(..., ge=0)
