"""
Simulated hallway runs: ray-cast sonar and laser scans with surrogate anomaly physics.
"""
import math
import zlib
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import shapely
import structlog

from conflictgrid.core.exceptions import SimulationError
from conflictgrid.schemas.sensor import (
    Pose,
    RangeReading,
    ReadingAnomaly,
    SensorKind,
    SensorModelParams,
)
from conflictgrid.schemas.world import (
    AnomalyParams,
    Environment,
    Material,
    RunHeader,
    RunLog,
    Scenario,
    ScanRecord,
)

logger = structlog.get_logger(__name__)

PARALLEL_EPS = 1e-12
HIT_EPS = 1e-9
MIN_RANGE = 1e-3


class RayHit(NamedTuple):
    distance: float
    normal: tuple[float, float]
    material: Material
    segment: int


@dataclass(frozen=True)
class WorldGeometry:
    """Wall segments of an environment as arrays, plus its polygon."""
    environment: Environment
    starts: np.ndarray
    spans: np.ndarray
    glass: np.ndarray
    polygon: shapely.Polygon

    @classmethod
    def of(cls, env: Environment) -> "WorldGeometry":
        starts = np.array([w.start for w in env.walls], dtype=np.float64)
        ends = np.array([w.end for w in env.walls], dtype=np.float64)
        return cls(
            environment=env,
            starts=starts,
            spans=ends - starts,
            glass=np.array([w.material is Material.GLASS for w in env.walls]),
            polygon=shapely.Polygon(env.vertices()),
        )

    def contains(self, x: float, y: float) -> bool:
        return bool(shapely.contains_xy(self.polygon, x, y))


def _geometry(world: Environment | WorldGeometry) -> WorldGeometry:
    return world if isinstance(world, WorldGeometry) else WorldGeometry.of(world)


def _cross(ax: np.ndarray, ay: np.ndarray, bx: np.ndarray, by: np.ndarray) -> np.ndarray:
    return ax * by - ay * bx


def ray_hits(
    world: Environment | WorldGeometry, origin: tuple[float, float], direction: tuple[float, float]
) -> list[RayHit]:
    """Every wall crossing along the ray, nearest first."""
    geo = _geometry(world)
    dx, dy = direction
    sx, sy = geo.spans[:, 0], geo.spans[:, 1]
    wx = geo.starts[:, 0] - origin[0]
    wy = geo.starts[:, 1] - origin[1]

    denom = _cross(np.float64(dx), np.float64(dy), sx, sy)
    valid = np.abs(denom) > PARALLEL_EPS
    safe = np.where(valid, denom, 1.0)
    t = _cross(wx, wy, sx, sy) / safe
    u = _cross(wx, wy, np.float64(dx), np.float64(dy)) / safe
    valid &= (t > HIT_EPS) & (u >= -HIT_EPS) & (u <= 1.0 + HIT_EPS)

    hits = []
    for i in np.flatnonzero(valid):
        length = math.hypot(sx[i], sy[i])
        nx, ny = -sy[i] / length, sx[i] / length
        if nx * dx + ny * dy > 0.0:
            nx, ny = -nx, -ny
        material = Material.GLASS if geo.glass[i] else Material.SMOOTH
        hits.append(RayHit(float(t[i]), (float(nx), float(ny)), material, int(i)))
    hits.sort(key=lambda h: (h.distance, h.segment))
    return hits


def cast_ray(
    world: Environment | WorldGeometry, origin: tuple[float, float], direction: tuple[float, float]
) -> Optional[RayHit]:
    """
    Nearest wall along a ray with unit `direction`, or None.

    The returned normal faces back toward the ray origin.
    """
    hits = ray_hits(world, origin, direction)
    return hits[0] if hits else None


def incidence_angle(hit: RayHit, direction: tuple[float, float]) -> float:
    """Angle between the incoming ray and the surface normal, in [0, π/2]."""
    cos = abs(hit.normal[0] * direction[0] + hit.normal[1] * direction[1])
    return math.acos(min(1.0, cos))


def _check_pose(geo: WorldGeometry, pose: Pose) -> None:
    if not geo.contains(pose.x, pose.y):
        raise SimulationError(
            f"pose ({pose.x:.3f}, {pose.y:.3f}) is outside hallway {geo.environment.name}"
        )


def _noisy(distance: float, anomaly: AnomalyParams, rng: np.random.Generator) -> float:
    if anomaly.range_noise_sigma > 0.0:
        distance += float(rng.normal(0.0, anomaly.range_noise_sigma))
    return distance


def _reading(
    pose: Pose,
    bearing: float,
    distance: Optional[float],
    params: SensorModelParams,
    anomaly: ReadingAnomaly = ReadingAnomaly.NONE,
) -> RangeReading:
    if distance is None or distance >= params.max_range:
        return RangeReading(
            sensor_pose=pose,
            beam_bearing=bearing,
            range=params.max_range,
            at_max_range=True,
            anomaly=anomaly,
        )
    return RangeReading(
        sensor_pose=pose,
        beam_bearing=bearing,
        range=max(distance, MIN_RANGE),
        anomaly=anomaly,
    )


def simulate_sonar_scan(
    world: Environment | WorldGeometry,
    pose: Pose,
    params: SensorModelParams,
    anomaly: AnomalyParams,
    rng: np.random.Generator,
) -> list[RangeReading]:
    """
    One reading per transducer from the central ray of each beam.

    Echoes arriving more than `sonar_critical_angle` off the surface normal are
    specular: lost (max-range return) or elongated by the multipath factor.

    Raises:
        SimulationError: the pose lies outside the hallway
    """
    geo = _geometry(world)
    _check_pose(geo, pose)
    readings = []
    for bearing in params.bearings():
        angle = pose.heading + bearing
        direction = (math.cos(angle), math.sin(angle))
        hit = cast_ray(geo, (pose.x, pose.y), direction)
        if hit is None or hit.distance >= params.max_range:
            readings.append(_reading(pose, bearing, None, params))
            continue
        distance = _noisy(hit.distance, anomaly, rng)
        if incidence_angle(hit, direction) <= anomaly.sonar_critical_angle:
            readings.append(_reading(pose, bearing, distance, params))
        elif rng.random() < anomaly.max_range_probability:
            readings.append(_reading(pose, bearing, None, params, ReadingAnomaly.MAX_RANGE))
        else:
            readings.append(
                _reading(
                    pose,
                    bearing,
                    distance * anomaly.multipath_factor,
                    params,
                    ReadingAnomaly.MULTIPATH,
                )
            )
    return readings


def simulate_laser_scan(
    world: Environment | WorldGeometry,
    pose: Pose,
    params: SensorModelParams,
    anomaly: AnomalyParams,
    rng: np.random.Generator,
) -> list[RangeReading]:
    """
    One reading per laser beam. Glass lets a beam through with probability
    `glass_laser_transmission`; the beam then returns from whatever lies beyond.

    Raises:
        SimulationError: the pose lies outside the hallway
    """
    geo = _geometry(world)
    _check_pose(geo, pose)
    transmission = anomaly.glass_laser_transmission
    readings = []
    for bearing in params.bearings():
        angle = pose.heading + bearing
        direction = (math.cos(angle), math.sin(angle))
        flag = ReadingAnomaly.NONE
        distance: Optional[float] = None
        for hit in ray_hits(geo, (pose.x, pose.y), direction):
            if hit.distance >= params.max_range:
                break
            if hit.material is Material.GLASS and transmission > 0.0:
                if rng.random() < transmission:
                    flag = ReadingAnomaly.TRANSMITTED
                    continue
            distance = _noisy(hit.distance, anomaly, rng)
            break
        readings.append(_reading(pose, bearing, distance, params, flag))
    return readings


def run_rng(seed: int, hallway: str, sensor: SensorKind) -> np.random.Generator:
    """Generator for one run; all of a run's randomness comes from here."""
    return np.random.default_rng(
        [seed, zlib.crc32(hallway.encode()), zlib.crc32(sensor.value.encode())]
    )


def generate_run(scenario: Scenario, seed: int) -> RunLog:
    """
    Drive the robot down the hallway centreline, one scan per step.

    Raises:
        SimulationError: the start pose or any later pose leaves the hallway
    """
    env = scenario.environment
    geo = WorldGeometry.of(env)
    sensor = scenario.sensor
    rng = run_rng(seed, env.name, sensor.kind)
    simulate = simulate_sonar_scan if sensor.kind is SensorKind.SONAR else simulate_laser_scan

    start = env.start
    if not geo.contains(start.x, start.y):
        raise SimulationError(f"start pose of {env.name} is outside the hallway")

    steps = math.ceil(scenario.run_length / scenario.step - 1e-9)
    records = []
    for i in range(1, steps + 1):
        distance = round(i * scenario.step, 9)
        pose = Pose(
            x=start.x + distance * math.cos(start.heading),
            y=start.y + distance * math.sin(start.heading),
            heading=start.heading,
        )
        if not geo.contains(pose.x, pose.y):
            raise SimulationError(f"run leaves {env.name} after {distance} m")
        readings = simulate(geo, pose, sensor, scenario.anomaly, rng)
        records.append(ScanRecord(index=i - 1, distance=distance, pose=pose, readings=readings))

    run = RunLog(header=RunHeader(scenario=scenario, seed=seed), records=records)
    logger.debug(
        "Run generated",
        hallway=env.name,
        sensor=sensor.kind.value,
        seed=seed,
        scans=len(records),
        anomalies=sum(count_anomalies(run).values()),
    )
    return run


def count_anomalies(run: RunLog) -> Counter[ReadingAnomaly]:
    """Readings the simulator altered, by kind."""
    counts: Counter[ReadingAnomaly] = Counter()
    for record in run.records:
        for reading in record.readings:
            if reading.anomaly is not ReadingAnomaly.NONE:
                counts[reading.anomaly] += 1
    return counts
