"""
Indicator configurations and the threshold grid they are swept over.
"""
from enum import Enum
from typing import NamedTuple, Optional

from pydantic import Field, model_validator

from conflictgrid.schemas.base import BaseSchema

RANGE_TOLERANCE = 1e-9


class IndicatorKind(str, Enum):
    TOTAL = "total"
    NORM_ANGULAR = "norm_angular"
    NORM_RANGE = "norm_range"
    NORM_UPDATE_RATE = "norm_update_rate"
    MAX_INCREASE = "max_increase"
    AVERAGE = "average"
    AVERAGE_SEQUENCE = "average_sequence"
    FREQUENCY = "frequency"
    INCREASE_FREQUENCY = "increase_frequency"
    GAMBINO = "gambino"
    AREA = "area"


class ThresholdRange(NamedTuple):
    low: float
    high: float
    step: float

    def values(self) -> list[float]:
        count = int(round((self.high - self.low) / self.step)) + 1
        return [round(self.low + i * self.step, 10) for i in range(count)]

    def contains(self, value: float) -> bool:
        return self.low - RANGE_TOLERANCE <= value <= self.high + RANGE_TOLERANCE


PRIMARY_RANGES: dict[IndicatorKind, ThresholdRange] = {
    IndicatorKind.AREA: ThresholdRange(0.25, 5.0, 0.25),
    IndicatorKind.AVERAGE: ThresholdRange(0.025, 0.5, 0.025),
    IndicatorKind.AVERAGE_SEQUENCE: ThresholdRange(0.05, 1.0, 0.05),
    IndicatorKind.FREQUENCY: ThresholdRange(0.05, 0.95, 0.05),
    IndicatorKind.GAMBINO: ThresholdRange(0.5, 10.0, 0.5),
    IndicatorKind.INCREASE_FREQUENCY: ThresholdRange(0.05, 0.95, 0.05),
    IndicatorKind.MAX_INCREASE: ThresholdRange(0.1, 2.0, 0.1),
    IndicatorKind.NORM_ANGULAR: ThresholdRange(0.025, 0.5, 0.025),
    IndicatorKind.NORM_RANGE: ThresholdRange(0.25, 5.0, 0.25),
    IndicatorKind.NORM_UPDATE_RATE: ThresholdRange(0.025, 0.5, 0.025),
    IndicatorKind.TOTAL: ThresholdRange(0.25, 5.0, 0.25),
}

# Component size for area, Con magnitude for increase_frequency.
SECONDARY_RANGES: dict[IndicatorKind, ThresholdRange] = {
    IndicatorKind.AREA: ThresholdRange(50.0, 250.0, 50.0),
    IndicatorKind.INCREASE_FREQUENCY: ThresholdRange(0.5, 2.0, 0.5),
}


class IndicatorConfig(BaseSchema):
    kind: IndicatorKind
    primary_threshold: float
    secondary_threshold: Optional[float] = None

    @model_validator(mode="after")
    def check_thresholds(self) -> "IndicatorConfig":
        if not PRIMARY_RANGES[self.kind].contains(self.primary_threshold):
            raise ValueError(
                f"{self.kind.value} threshold {self.primary_threshold} outside "
                f"{PRIMARY_RANGES[self.kind]}"
            )
        secondary = SECONDARY_RANGES.get(self.kind)
        if secondary is None:
            if self.secondary_threshold is not None:
                raise ValueError(f"{self.kind.value} takes a single threshold")
        elif self.secondary_threshold is None or not secondary.contains(
            self.secondary_threshold
        ):
            raise ValueError(
                f"{self.kind.value} needs a secondary threshold within {secondary}"
            )
        return self

    @property
    def key(self) -> str:
        """Stable identifier, e.g. 'gambino@2' or 'area@0.25/50'."""
        key = f"{self.kind.value}@{self.primary_threshold:g}"
        if self.secondary_threshold is not None:
            key += f"/{self.secondary_threshold:g}"
        return key


class SensorMeta(BaseSchema):
    """Divisors for the three normalized indicators."""
    angular_resolution_deg: float = Field(..., gt=0.0)
    range_resolution: float = Field(..., gt=0.0)
    mean_update_rate: float = Field(
        0.0, ge=0.0, description="mean n_updates over updated cells; 0 when none"
    )
