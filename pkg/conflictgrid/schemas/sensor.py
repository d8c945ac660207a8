"""
Sensor parameters and range readings.
"""
import math
from enum import Enum

from pydantic import Field

from conflictgrid.schemas.base import BaseSchema

# One cell diagonal at 10.16 cm.
DEFAULT_RANGE_TOLERANCE = 0.1437


class SensorKind(str, Enum):
    SONAR = "sonar"
    LASER = "laser"


class ReadingAnomaly(str, Enum):
    """What the simulator did to a reading; never read by the mapper."""
    NONE = "none"
    MAX_RANGE = "max_range"
    MULTIPATH = "multipath"
    TRANSMITTED = "transmitted"


class SensorModelParams(BaseSchema):
    """Cone model and beam layout of one range sensor."""
    kind: SensorKind
    max_range: float = Field(..., gt=0.0, description="R, meters")
    half_angle: float = Field(
        ..., ge=0.0, le=math.pi / 2, description="β, radians (0 gives a line beam)"
    )
    max_occupied_mass: float = Field(0.98, gt=0.0, lt=1.0)
    range_tolerance: float = Field(DEFAULT_RANGE_TOLERANCE, gt=0.0, description="meters")
    beam_count: int = Field(..., ge=1)
    beam_spacing: float = Field(..., gt=0.0, description="radians between adjacent beams")
    first_bearing: float = Field(0.0, description="bearing of beam 0 relative to heading")
    range_resolution: float = Field(
        1.0, gt=0.0, description="meters; divisor of the range-normalized indicator"
    )

    @classmethod
    def sonar(cls, **overrides: object) -> "SensorModelParams":
        """A 16-transducer ring."""
        values: dict[str, object] = {
            "kind": SensorKind.SONAR,
            "max_range": 5.0,
            "half_angle": math.radians(15.0),
            "beam_count": 16,
            "beam_spacing": math.radians(22.5),
            "first_bearing": 0.0,
        }
        values.update(overrides)
        return cls.model_validate(values)

    @classmethod
    def laser(cls, **overrides: object) -> "SensorModelParams":
        """A 180° planar scanner at 1° spacing."""
        values: dict[str, object] = {
            "kind": SensorKind.LASER,
            "max_range": 8.0,
            "half_angle": math.radians(0.5),
            "beam_count": 181,
            "beam_spacing": math.radians(1.0),
            "first_bearing": math.radians(-90.0),
        }
        values.update(overrides)
        return cls.model_validate(values)

    def bearings(self) -> list[float]:
        return [self.first_bearing + i * self.beam_spacing for i in range(self.beam_count)]

    @property
    def angular_resolution_deg(self) -> float:
        return math.degrees(self.beam_spacing)


class Pose(BaseSchema):
    x: float
    y: float
    heading: float = Field(0.0, description="radians")


class RangeReading(BaseSchema):
    """One beam of one scan."""
    sensor_pose: Pose
    beam_bearing: float = Field(..., description="radians relative to heading")
    range: float = Field(..., gt=0.0, description="d, meters")
    at_max_range: bool = False
    anomaly: ReadingAnomaly = ReadingAnomaly.NONE

    @property
    def world_bearing(self) -> float:
        return self.sensor_pose.heading + self.beam_bearing
