"""
Cone sensor model: one range reading becomes per-cell evidence.

Two regions along the cone, after the usual textbook sonar convention:
Region I hugs the returned range and supports {occupied}; Region II lies in
front of it and supports {empty}. Both fade linearly with range and with the
angle off the beam axis.
"""
import math
from typing import NamedTuple

import numpy as np

from conflictgrid.core.exceptions import SensorModelError
from conflictgrid.schemas.evidence import BeliefMass
from conflictgrid.schemas.grid import GridSpec
from conflictgrid.schemas.sensor import RangeReading, SensorModelParams
from conflictgrid.services.evidence import MassArrays

ANGLE_EPS = 1e-12


class FootprintCell(NamedTuple):
    ix: int
    iy: int
    r: float
    alpha: float


class Footprint(NamedTuple):
    """Parallel arrays over footprint cells, row-major order."""
    ix: np.ndarray
    iy: np.ndarray
    r: np.ndarray
    alpha: np.ndarray

    def __len__(self) -> int:
        return int(self.ix.size)


def _empty_footprint() -> Footprint:
    empty_i = np.zeros(0, dtype=np.intp)
    empty_f = np.zeros(0, dtype=np.float64)
    return Footprint(empty_i, empty_i, empty_f, empty_f)


def wrap_angle(angle: np.ndarray) -> np.ndarray:
    """Wrap to [-π, π)."""
    return (angle + np.pi) % (2.0 * np.pi) - np.pi


def _sector_bounds(
    x: float, y: float, bearing: float, beta: float, reach: float
) -> tuple[float, float, float, float]:
    """Axis-aligned bounding box of a circular sector."""
    xs = [x]
    ys = [y]
    for angle in (bearing - beta, bearing + beta):
        xs.append(x + reach * math.cos(angle))
        ys.append(y + reach * math.sin(angle))
    for quadrant in range(4):
        axis = quadrant * math.pi / 2.0
        offset = math.remainder(axis - bearing, 2.0 * math.pi)
        if abs(offset) <= beta:
            xs.append(x + reach * math.cos(axis))
            ys.append(y + reach * math.sin(axis))
    return min(xs), max(xs), min(ys), max(ys)


def footprint_arrays(
    reading: RangeReading, params: SensorModelParams, grid_spec: GridSpec
) -> Footprint:
    """
    Cells whose centres fall inside the reading's cone.

    The cone reaches min(d + tolerance, R); a max-range return reaches only the
    empty region in front of d - tolerance. The sensor's own cell (r = 0) is left out.
    """
    pose = reading.sensor_pose
    if grid_spec.world_to_cell(pose.x, pose.y) is None:
        return _empty_footprint()

    d = min(reading.range, params.max_range)
    if reading.at_max_range:
        reach = d - params.range_tolerance
        if reach <= 0.0:
            return _empty_footprint()
    else:
        reach = min(d + params.range_tolerance, params.max_range)

    beta = params.half_angle
    bearing = reading.world_bearing
    min_x, max_x, min_y, max_y = _sector_bounds(pose.x, pose.y, bearing, beta, reach)

    size = grid_spec.cell_size
    n = grid_spec.cells
    ix0 = max(0, math.floor((min_x - grid_spec.min_x) / size))
    ix1 = min(n - 1, math.floor((max_x - grid_spec.min_x) / size))
    iy0 = max(0, math.floor((min_y - grid_spec.min_y) / size))
    iy1 = min(n - 1, math.floor((max_y - grid_spec.min_y) / size))
    if ix0 > ix1 or iy0 > iy1:
        return _empty_footprint()

    iy, ix = np.mgrid[iy0 : iy1 + 1, ix0 : ix1 + 1]
    ix = ix.ravel()
    iy = iy.ravel()
    dx = grid_spec.min_x + (ix + 0.5) * size - pose.x
    dy = grid_spec.min_y + (iy + 0.5) * size - pose.y
    r = np.hypot(dx, dy)
    alpha = wrap_angle(np.arctan2(dy, dx) - bearing)

    inside = (r > 0.0) & (np.abs(alpha) <= beta + ANGLE_EPS)
    if reading.at_max_range:
        inside &= r < reach
    else:
        inside &= r <= reach
    return Footprint(ix[inside], iy[inside], r[inside], alpha[inside])


def cells_in_footprint(
    reading: RangeReading, params: SensorModelParams, grid_spec: GridSpec
) -> list[FootprintCell]:
    """
    List the cells covered by a reading's cone as (ix, iy, r, α).

    A pose outside the grid yields an empty list.
    """
    fp = footprint_arrays(reading, params, grid_spec)
    return [
        FootprintCell(int(i), int(j), float(r), float(a))
        for i, j, r, a in zip(fp.ix, fp.iy, fp.r, fp.alpha)
    ]


def evidence_arrays(
    r: np.ndarray, alpha: np.ndarray, d: float, params: SensorModelParams
) -> MassArrays:
    """Vectorized evidence_for_cell; inputs are assumed inside the cone."""
    big_r = params.max_range
    beta = params.half_angle
    if beta > 0.0:
        angular = np.clip((beta - np.abs(alpha)) / beta, 0.0, 1.0)
    else:
        angular = np.ones_like(r)
    strength = ((big_r - r) / big_r + angular) / 2.0

    tol = params.range_tolerance
    region_one = np.abs(r - d) <= tol
    region_two = (r < d - tol) & ~region_one

    o = np.where(region_one, strength * params.max_occupied_mass, 0.0)
    e = np.where(region_two, strength, 0.0)
    t = 1.0 - o - e
    return MassArrays(o, e, t, np.zeros_like(o))


def evidence_for_cell(r: float, alpha: float, d: float, params: SensorModelParams) -> BeliefMass:
    """
    Belief mass one reading of range d lends a cell at range r, angle α off axis.

    Region I (|r-d| <= tolerance): m(O) = ((R-r)/R + (β-|α|)/β)/2 * max_occupied_mass.
    Region II (r < d - tolerance): m(E) = ((R-r)/R + (β-|α|)/β)/2.
    Elsewhere the cell stays vacuous. The remainder always goes to Θ.

    Raises:
        SensorModelError: |α| > β or r outside (0, R]
    """
    if abs(alpha) > params.half_angle + ANGLE_EPS:
        raise SensorModelError(f"|alpha|={abs(alpha)!r} exceeds half angle {params.half_angle!r}")
    if not 0.0 < r <= params.max_range:
        raise SensorModelError(f"r={r!r} is outside (0, {params.max_range}]")
    if not 0.0 < d <= params.max_range:
        raise SensorModelError(f"d={d!r} is outside (0, {params.max_range}]")
    masses = evidence_arrays(np.float64(r), np.float64(alpha), d, params)
    return BeliefMass(
        m_occupied=float(masses.o),
        m_empty=float(masses.e),
        m_theta=float(masses.t),
    )
