"""
Simulated hallways, anomaly physics and run logs.
"""
import math
from enum import Enum
from typing import Literal

from pydantic import Field, field_validator, model_validator

from conflictgrid.schemas.base import BaseSchema
from conflictgrid.schemas.sensor import Pose, RangeReading, SensorModelParams

CLOSURE_TOLERANCE = 1e-9


class Material(str, Enum):
    SMOOTH = "smooth"
    GLASS = "glass"


class WallSegment(BaseSchema):
    start: tuple[float, float]
    end: tuple[float, float]
    material: Material = Material.SMOOTH

    @property
    def length(self) -> float:
        return math.dist(self.start, self.end)


class Environment(BaseSchema):
    """A corridor: a closed polygon of wall segments plus the robot's start pose."""
    name: str
    width: float = Field(..., gt=0.0, description="meters")
    length: float = Field(..., gt=0.0, description="meters")
    walls: list[WallSegment] = Field(..., min_length=1)
    start: Pose = Field(default_factory=lambda: Pose(x=0.0, y=0.0, heading=0.0))

    @field_validator("name")
    def validate_name(cls, v: str) -> str:
        if not v or not v.strip():
            raise ValueError("name cannot be empty")
        return v.strip()

    @model_validator(mode="after")
    def check_closed(self) -> "Environment":
        for current, following in zip(self.walls, self.walls[1:] + self.walls[:1]):
            if math.dist(current.end, following.start) > CLOSURE_TOLERANCE:
                raise ValueError(
                    f"walls do not form a closed polygon at {current.end} -> {following.start}"
                )
        return self

    def vertices(self) -> list[tuple[float, float]]:
        return [wall.start for wall in self.walls]


def build_hallway(
    name: str,
    width: float,
    length: float,
    run_length: float = 6.0,
    glass_pane: float | None = None,
    mullion: float = 0.5,
) -> Environment:
    """
    Rectangular hallway along +x with the start pose on the centreline.

    The traversal is centred along the hallway. With `glass_pane` set, the +y wall
    alternates glass panes and smooth mullions.
    """
    x0 = -(length - run_length) / 2.0
    x1 = x0 + length
    y0, y1 = -width / 2.0, width / 2.0

    walls = [
        WallSegment(start=(x0, y0), end=(x1, y0)),
        WallSegment(start=(x1, y0), end=(x1, y1)),
    ]
    if glass_pane is None:
        walls.append(WallSegment(start=(x1, y1), end=(x0, y1)))
    else:
        # Panels are laid out from x1 back to x0.
        cursor = x1
        use_glass = False
        while cursor > x0 + CLOSURE_TOLERANCE:
            span = glass_pane if use_glass else mullion
            nxt = max(x0, cursor - span)
            walls.append(
                WallSegment(
                    start=(cursor, y1),
                    end=(nxt, y1),
                    material=Material.GLASS if use_glass else Material.SMOOTH,
                )
            )
            cursor = nxt
            use_glass = not use_glass
    walls.append(WallSegment(start=(x0, y1), end=(x0, y0)))
    return Environment(name=name, width=width, length=length, walls=walls)


def default_hallways(run_length: float = 6.0) -> list[Environment]:
    """Narrow and wide smooth hallways, and a hallway with large windows."""
    return [
        build_hallway("narrow", 1.8, 11.2, run_length),
        build_hallway("wide", 2.5, 14.2, run_length),
        build_hallway("window", 2.0, 27.0, run_length, glass_pane=2.0),
    ]


class AnomalyParams(BaseSchema):
    """Surrogate physics for specular sonar echoes and glass-blind lasers."""
    sonar_critical_angle: float = Field(
        math.radians(30.0), ge=0.0, le=math.pi / 2, description="radians from the normal"
    )
    max_range_probability: float = Field(
        0.5, ge=0.0, le=1.0, description="share of specular echoes lost entirely"
    )
    multipath_factor: float = Field(1.5, ge=1.0, description="elongation of the other share")
    glass_laser_transmission: float = Field(0.9, ge=0.0, le=1.0)
    range_noise_sigma: float = Field(0.01, ge=0.0, description="meters")

    @classmethod
    def disabled(cls, range_noise_sigma: float = 0.0) -> "AnomalyParams":
        """No specular loss, opaque glass and (by default) no noise."""
        return cls(
            sonar_critical_angle=math.pi / 2,
            glass_laser_transmission=0.0,
            range_noise_sigma=range_noise_sigma,
        )


class Scenario(BaseSchema):
    environment: Environment
    sensor: SensorModelParams
    anomaly: AnomalyParams = Field(default_factory=AnomalyParams)
    step: float = Field(0.1, gt=0.0, description="meters between scans")
    run_length: float = Field(6.0, gt=0.0, description="meters")


class RunHeader(BaseSchema):
    kind: Literal["header"] = "header"
    scenario: Scenario
    seed: int


class ScanRecord(BaseSchema):
    kind: Literal["scan"] = "scan"
    index: int = Field(..., ge=0)
    distance: float = Field(..., ge=0.0, description="meters traveled")
    pose: Pose
    readings: list[RangeReading]


class RunLog(BaseSchema):
    header: RunHeader
    records: list[ScanRecord]

    @model_validator(mode="after")
    def check_distances(self) -> "RunLog":
        distances = [record.distance for record in self.records]
        if any(b < a for a, b in zip(distances, distances[1:])):
            raise ValueError("distance traveled must be non-decreasing")
        target = self.header.scenario.run_length
        if not distances or distances[-1] < target - 1e-9:
            raise ValueError(f"run must reach {target} m")
        return self
