"""
Evidential occupancy grid with per-cell conflict bookkeeping.

Each cell carries two belief states: a Dempster (normalized) state, which the map
and the Con-based indicators read, and a Smets (unnormalized) state, whose ∅ mass
feeds the Gambino trigger.
"""
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import shapely
import structlog
from skimage.filters import threshold_otsu

from conflictgrid.core.exceptions import ConfigError, GridDimensionError, ScanError
from conflictgrid.schemas.evidence import BeliefMass
from conflictgrid.schemas.grid import DEFAULT_MAGNITUDES, CellStats, GridSpec, TruthLabel
from conflictgrid.schemas.indicator import SensorMeta
from conflictgrid.schemas.sensor import RangeReading, SensorModelParams
from conflictgrid.schemas.world import Environment
from conflictgrid.services.evidence import (
    MassArrays,
    conflict_factor_arrays,
    conjunctive_arrays,
    dempster_arrays,
    weight_of_conflict_arrays,
)
from conflictgrid.services.sensor_models import evidence_arrays, footprint_arrays

logger = structlog.get_logger(__name__)

GAMBINO_CONFIDENCE = 0.5
GAMBINO_RISE = 0.10
COMPARE_EPS = 1e-12


def gambino_trigger(prior: MassArrays, post: MassArrays) -> np.ndarray:
    """
    Cells where a confident Smets belief took at least 0.10 of new ∅ mass.

    Confidence is read on the pre-combination state. Each trigger adds at least
    0.10 to an ∅ mass that never shrinks, and confidence needs ∅ <= 0.5, so one
    cell can trigger at most six times.
    """
    confident = np.maximum(prior.o, prior.e) >= GAMBINO_CONFIDENCE - COMPARE_EPS
    rising = (post.c - prior.c) >= GAMBINO_RISE - COMPARE_EPS
    return confident & rising


def _vacuous(shape: tuple[int, int]) -> MassArrays:
    return MassArrays(np.zeros(shape), np.zeros(shape), np.ones(shape), np.zeros(shape))


@dataclass
class EvidenceGrid:
    """Belief and conflict statistics for every cell of one run's grid."""
    spec: GridSpec
    sensor: SensorModelParams
    magnitudes: tuple[float, ...] = DEFAULT_MAGNITUDES
    dempster: MassArrays = field(init=False)
    smets: MassArrays = field(init=False)
    n_updates: np.ndarray = field(init=False)
    n_conflicting: np.ndarray = field(init=False)
    total_con: np.ndarray = field(init=False)
    max_con: np.ndarray = field(init=False)
    seq_sum: np.ndarray = field(init=False)
    seq_len: np.ndarray = field(init=False)
    magnitude_counts: dict[float, np.ndarray] = field(init=False)
    gambino_count: np.ndarray = field(init=False)
    con_generated: float = field(init=False, default=0.0)
    saturations: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        shape = self.spec.shape
        self.magnitudes = tuple(sorted(set(self.magnitudes)))
        self.dempster = _vacuous(shape)
        self.smets = _vacuous(shape)
        self.n_updates = np.zeros(shape, dtype=np.int64)
        self.n_conflicting = np.zeros(shape, dtype=np.int64)
        self.total_con = np.zeros(shape)
        self.max_con = np.zeros(shape)
        self.seq_sum = np.zeros(shape)
        self.seq_len = np.zeros(shape, dtype=np.int64)
        self.magnitude_counts = {m: np.zeros(shape, dtype=np.int64) for m in self.magnitudes}
        self.gambino_count = np.zeros(shape, dtype=np.int64)

    @property
    def shape(self) -> tuple[int, int]:
        return self.spec.shape

    @property
    def scanned(self) -> np.ndarray:
        return self.n_updates >= 1

    def belief(self, ix: int, iy: int) -> BeliefMass:
        """Dempster belief of a cell."""
        d = self.dempster
        return BeliefMass(
            m_occupied=float(d.o[iy, ix]), m_empty=float(d.e[iy, ix]), m_theta=float(d.t[iy, ix])
        )

    def set_belief(
        self, ix: int, iy: int, dempster: BeliefMass, smets: BeliefMass | None = None
    ) -> None:
        """Seed a cell's belief states; used to replay recorded or hand-built situations."""
        for arrays, mass in ((self.dempster, dempster), (self.smets, smets or dempster)):
            arrays.o[iy, ix], arrays.e[iy, ix], arrays.t[iy, ix], arrays.c[iy, ix] = mass.as_tuple()

    def cell_stats(self, ix: int, iy: int) -> CellStats:
        return CellStats(
            n_updates=int(self.n_updates[iy, ix]),
            n_conflicting=int(self.n_conflicting[iy, ix]),
            total_con=float(self.total_con[iy, ix]),
            max_con=float(self.max_con[iy, ix]),
            seq_sum=float(self.seq_sum[iy, ix]),
            seq_len=int(self.seq_len[iy, ix]),
            magnitude_counts={m: int(c[iy, ix]) for m, c in self.magnitude_counts.items()},
            gambino_count=int(self.gambino_count[iy, ix]),
        )

    def sensor_meta(self) -> SensorMeta:
        """Normalization divisors for the current state of the grid."""
        scanned = self.scanned
        mean_rate = float(self.n_updates[scanned].mean()) if scanned.any() else 0.0
        return SensorMeta(
            angular_resolution_deg=self.sensor.angular_resolution_deg,
            range_resolution=self.sensor.range_resolution,
            mean_update_rate=mean_rate,
        )


@dataclass(frozen=True)
class ScanSummary:
    cells_touched: int
    total_con: float
    saturated: int


@dataclass
class TruthGrid:
    spec: GridSpec
    labels: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape  # type: ignore[return-value]


def _apply_reading(
    grid: EvidenceGrid, reading: RangeReading, params: SensorModelParams
) -> tuple[int, float, int]:
    fp = footprint_arrays(reading, params, grid.spec)
    if len(fp) == 0:
        return 0, 0.0, 0
    idx = (fp.iy, fp.ix)
    evidence = evidence_arrays(fp.r, fp.alpha, min(reading.range, params.max_range), params)

    # (1)-(2) Con between the prior Dempster belief and the new evidence.
    d = grid.dempster
    prior = MassArrays(d.o[idx], d.e[idx], d.t[idx], d.c[idx])
    k = conflict_factor_arrays(prior, evidence)
    con, saturated = weight_of_conflict_arrays(k)
    conflicting = con > 0.0

    grid.total_con[idx] += con
    grid.max_con[idx] = np.maximum(grid.max_con[idx], con)
    grid.n_conflicting[idx] += conflicting
    grid.seq_sum[idx] = np.where(conflicting, grid.seq_sum[idx] + con, 0.0)
    grid.seq_len[idx] = np.where(conflicting, grid.seq_len[idx] + 1, 0)
    for magnitude, counts in grid.magnitude_counts.items():
        counts[idx] += con >= magnitude

    # (3)-(4) Smets state, with the Gambino trigger read before combining.
    s = grid.smets
    smets_prior = MassArrays(s.o[idx], s.e[idx], s.t[idx], s.c[idx])
    smets_post = conjunctive_arrays(smets_prior, evidence)
    grid.gambino_count[idx] += gambino_trigger(smets_prior, smets_post)
    s.o[idx], s.e[idx], s.t[idx], s.c[idx] = smets_post

    # (3) Dempster state; saturated cells restart from ignorance.
    dempster_post, _, _, _ = dempster_arrays(prior, evidence)
    d.o[idx], d.e[idx], d.t[idx], d.c[idx] = dempster_post

    # (5)
    grid.n_updates[idx] += 1

    total = float(con.sum())
    n_saturated = int(saturated.sum())
    grid.con_generated += total
    grid.saturations += n_saturated
    return len(fp), total, n_saturated


def update_grid(
    grid: EvidenceGrid, scan: Sequence[RangeReading], params: SensorModelParams
) -> ScanSummary:
    """
    Fold one scan into the grid, reading by reading.

    Raises:
        ConfigError: params describe a different sensor than the grid's
        ScanError: the readings do not share one pose
    """
    if params.kind != grid.sensor.kind:
        raise ConfigError(
            f"grid built for {grid.sensor.kind.value} cannot take {params.kind.value} readings"
        )
    if scan and any(r.sensor_pose != scan[0].sensor_pose for r in scan[1:]):
        raise ScanError("readings of one scan must share a pose")

    touched = 0
    total = 0.0
    saturated = 0
    for reading in scan:
        cells, con, sat = _apply_reading(grid, reading, params)
        touched += cells
        total += con
        saturated += sat
    if saturated:
        logger.warning("Dempster saturation reset cells to vacuous", cells=saturated)
    return ScanSummary(cells_touched=touched, total_con=total, saturated=saturated)


def _check_dimensions(grid: EvidenceGrid, truth: TruthGrid) -> None:
    if grid.shape != truth.shape:
        raise GridDimensionError(grid.shape, truth.shape)


def cell_errors(grid: EvidenceGrid, truth: TruthGrid) -> tuple[np.ndarray, np.ndarray]:
    """
    Per-cell max(|m(O)-truth_o|, |m(E)-truth_e|) and the mask of cells it counts on.

    Cells excluded from truth or never updated are masked out.
    """
    _check_dimensions(grid, truth)
    truth_o = (truth.labels == TruthLabel.OCCUPIED).astype(np.float64)
    truth_e = (truth.labels == TruthLabel.EMPTY).astype(np.float64)
    error = np.maximum(np.abs(grid.dempster.o - truth_o), np.abs(grid.dempster.e - truth_e))
    counted = (truth.labels != TruthLabel.EXCLUDED) & grid.scanned
    return np.where(counted, error, 0.0), counted


def error_score(grid: EvidenceGrid, truth: TruthGrid) -> float:
    """
    Sum of per-cell errors over scanned, non-excluded cells. Lower is better.

    Raises:
        GridDimensionError: grid and truth differ in shape
    """
    error, _ = cell_errors(grid, truth)
    return float(error.sum())


def error_image(grid: EvidenceGrid, truth: TruthGrid) -> np.ndarray:
    """
    Otsu-binarized per-cell error image; all false when the error image is constant.

    Unscanned and excluded cells enter the grayscale image as zero.
    """
    gray, _ = cell_errors(grid, truth)
    if gray.min() == gray.max():
        return np.zeros(gray.shape, dtype=bool)
    return gray > threshold_otsu(gray)


def _wall_lines(env: Environment) -> Iterable[shapely.LineString]:
    for wall in env.walls:
        yield shapely.LineString([wall.start, wall.end])


def rasterize_truth(env: Environment, spec: GridSpec) -> TruthGrid:
    """
    Label cells occupied where a wall crosses them, empty inside the corridor,
    and excluded everywhere else (beyond walls included).

    A zero-area corridor leaves every cell excluded.
    """
    shape = spec.shape
    labels = np.full(shape, TruthLabel.EXCLUDED, dtype=np.int8)
    vertices = env.vertices()
    polygon = shapely.Polygon(vertices) if len(vertices) >= 3 else None
    if polygon is None or polygon.area <= 0.0:
        logger.warning("Degenerate environment, every cell excluded", environment=env.name)
        return TruthGrid(spec=spec, labels=labels)

    n = spec.cells
    size = spec.cell_size
    iy, ix = np.mgrid[0:n, 0:n]
    xc = spec.min_x + (ix + 0.5) * size
    yc = spec.min_y + (iy + 0.5) * size
    inside = shapely.contains_xy(polygon, xc, yc)
    labels[inside] = TruthLabel.EMPTY

    for line in _wall_lines(env):
        min_x, min_y, max_x, max_y = line.bounds
        ix0 = max(0, int(np.floor((min_x - spec.min_x) / size)) - 1)
        ix1 = min(n - 1, int(np.floor((max_x - spec.min_x) / size)) + 1)
        iy0 = max(0, int(np.floor((min_y - spec.min_y) / size)) - 1)
        iy1 = min(n - 1, int(np.floor((max_y - spec.min_y) / size)) + 1)
        if ix0 > ix1 or iy0 > iy1:
            continue
        sub_y, sub_x = np.mgrid[iy0 : iy1 + 1, ix0 : ix1 + 1]
        x0 = spec.min_x + sub_x * size
        y0 = spec.min_y + sub_y * size
        boxes = shapely.box(x0, y0, x0 + size, y0 + size)
        hit = shapely.intersects(boxes, line)
        labels[sub_y[hit], sub_x[hit]] = TruthLabel.OCCUPIED

    return TruthGrid(spec=spec, labels=labels)
