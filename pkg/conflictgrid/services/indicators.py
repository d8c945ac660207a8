"""
Interpretation inconsistency indicators.

Each indicator turns a cell's conflict history into a feature, labels the cell
suspect when the feature reaches a threshold, and averages the surviving
features over the updated cells into a conflict score.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import structlog
from scipy import ndimage

from conflictgrid.core.exceptions import ConfigError
from conflictgrid.schemas.grid import CellStats
from conflictgrid.schemas.indicator import (
    PRIMARY_RANGES,
    SECONDARY_RANGES,
    IndicatorConfig,
    IndicatorKind,
    SensorMeta,
)
from conflictgrid.services.gridmap import EvidenceGrid

logger = structlog.get_logger(__name__)

SUSPECT_EPS = 1e-12
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)

# Kind order used for the report and the config enumeration.
REPORT_ORDER: tuple[IndicatorKind, ...] = (
    IndicatorKind.NORM_ANGULAR,
    IndicatorKind.AREA,
    IndicatorKind.AVERAGE,
    IndicatorKind.AVERAGE_SEQUENCE,
    IndicatorKind.FREQUENCY,
    IndicatorKind.GAMBINO,
    IndicatorKind.INCREASE_FREQUENCY,
    IndicatorKind.MAX_INCREASE,
    IndicatorKind.NORM_RANGE,
    IndicatorKind.TOTAL,
    IndicatorKind.NORM_UPDATE_RATE,
)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros(np.broadcast(num, den).shape), where=den > 0)


def _features(
    kind: IndicatorKind,
    meta: SensorMeta,
    n_updates: np.ndarray,
    n_conflicting: np.ndarray,
    total_con: np.ndarray,
    max_con: np.ndarray,
    seq_sum: np.ndarray,
    seq_len: np.ndarray,
    gambino_count: np.ndarray,
    magnitude_count: Optional[np.ndarray],
) -> np.ndarray:
    if kind is IndicatorKind.TOTAL or kind is IndicatorKind.AREA:
        values = np.asarray(total_con, dtype=np.float64)
    elif kind is IndicatorKind.NORM_ANGULAR:
        values = np.asarray(total_con, dtype=np.float64) / meta.angular_resolution_deg
    elif kind is IndicatorKind.NORM_RANGE:
        values = np.asarray(total_con, dtype=np.float64) / meta.range_resolution
    elif kind is IndicatorKind.NORM_UPDATE_RATE:
        values = np.asarray(total_con, dtype=np.float64)
        values = values / meta.mean_update_rate if meta.mean_update_rate > 0 else values * 0.0
    elif kind is IndicatorKind.MAX_INCREASE:
        values = np.asarray(max_con, dtype=np.float64)
    elif kind is IndicatorKind.AVERAGE:
        values = _ratio(total_con, n_updates)
    elif kind is IndicatorKind.AVERAGE_SEQUENCE:
        values = _ratio(seq_sum, seq_len)
    elif kind is IndicatorKind.FREQUENCY:
        values = _ratio(n_conflicting, n_updates)
    elif kind is IndicatorKind.INCREASE_FREQUENCY:
        values = _ratio(magnitude_count, n_updates)
    elif kind is IndicatorKind.GAMBINO:
        values = np.asarray(gambino_count, dtype=np.float64)
    else:  # pragma: no cover
        raise ConfigError(f"unknown indicator kind {kind!r}")
    return np.where(np.asarray(n_updates) >= 1, values, 0.0)


def _magnitude_key(magnitudes: dict[float, object], magnitude: Optional[float]) -> float:
    if magnitude is None:
        raise ConfigError("increase_frequency needs a magnitude")
    for key in magnitudes:
        if abs(key - magnitude) <= 1e-9:
            return key
    raise ConfigError(f"magnitude {magnitude:g} is not tracked; known {sorted(magnitudes)}")


def cell_feature(
    stats: CellStats,
    kind: IndicatorKind,
    sensor_meta: SensorMeta,
    magnitude: Optional[float] = None,
) -> float:
    """
    Feature value of one cell for an indicator kind. Cells never updated score 0.

    Raises:
        ConfigError: increase_frequency with a magnitude the cell does not track
    """
    count = None
    if kind is IndicatorKind.INCREASE_FREQUENCY:
        count = stats.magnitude_counts[_magnitude_key(stats.magnitude_counts, magnitude)]
    value = _features(
        kind,
        sensor_meta,
        np.asarray(stats.n_updates),
        np.asarray(stats.n_conflicting),
        np.asarray(stats.total_con),
        np.asarray(stats.max_con),
        np.asarray(stats.seq_sum),
        np.asarray(stats.seq_len),
        np.asarray(stats.gambino_count),
        None if count is None else np.asarray(count),
    )
    return float(value)


def label_suspect(feature: float | np.ndarray, config: IndicatorConfig) -> bool | np.ndarray:
    """True where the feature reaches the primary threshold (>=)."""
    suspect = np.asarray(feature) >= config.primary_threshold - SUSPECT_EPS
    return bool(suspect) if suspect.ndim == 0 else suspect


@dataclass(frozen=True)
class ConflictMap:
    suspect: np.ndarray
    config: IndicatorConfig

    @property
    def count(self) -> int:
        return int(self.suspect.sum())

    @property
    def empty(self) -> bool:
        return not self.suspect.any()


@dataclass
class IndicatorEvaluator:
    """
    Scores many configs against one quiescent grid.

    Feature maps and area component labelings are computed once per grid.
    """
    grid: EvidenceGrid
    meta: SensorMeta = field(init=False)
    _features: dict[tuple[IndicatorKind, Optional[float]], np.ndarray] = field(
        init=False, default_factory=dict
    )
    _components: dict[float, tuple[np.ndarray, np.ndarray]] = field(
        init=False, default_factory=dict
    )

    def __post_init__(self) -> None:
        self.meta = self.grid.sensor_meta()

    def feature_map(self, kind: IndicatorKind, magnitude: Optional[float] = None) -> np.ndarray:
        count = None
        if kind is IndicatorKind.INCREASE_FREQUENCY:
            magnitude = _magnitude_key(self.grid.magnitude_counts, magnitude)
            count = self.grid.magnitude_counts[magnitude]
        else:
            magnitude = None
        key = (kind, magnitude)
        if key not in self._features:
            g = self.grid
            self._features[key] = _features(
                kind,
                self.meta,
                g.n_updates,
                g.n_conflicting,
                g.total_con,
                g.max_con,
                g.seq_sum,
                g.seq_len,
                g.gambino_count,
                count,
            )
        return self._features[key]

    def _component_sizes(self, primary: float) -> tuple[np.ndarray, np.ndarray]:
        """8-connected labeling of the total-indicator suspect map, with component sizes."""
        if primary not in self._components:
            base = IndicatorConfig(kind=IndicatorKind.TOTAL, primary_threshold=primary)
            suspect = label_suspect(self.feature_map(IndicatorKind.TOTAL), base)
            labels, count = ndimage.label(suspect, structure=EIGHT_CONNECTED)
            sizes = np.bincount(labels.ravel(), minlength=count + 1)
            sizes[0] = 0
            self._components[primary] = (labels, sizes)
        return self._components[primary]

    def conflict_map(self, config: IndicatorConfig) -> ConflictMap:
        if config.kind is IndicatorKind.AREA:
            labels, sizes = self._component_sizes(config.primary_threshold)
            keep = sizes >= (config.secondary_threshold or 0.0) - SUSPECT_EPS
            keep[0] = False
            return ConflictMap(suspect=keep[labels], config=config)
        features = self.feature_map(config.kind, config.secondary_threshold)
        return ConflictMap(suspect=label_suspect(features, config), config=config)

    def conflict_score(
        self, config: IndicatorConfig, conflict_map: Optional[ConflictMap] = None
    ) -> float:
        """Mean over updated cells of the feature on suspect cells, 0 elsewhere."""
        scanned = self.grid.scanned
        n_scanned = int(scanned.sum())
        if n_scanned == 0:
            return 0.0
        cmap = conflict_map or self.conflict_map(config)
        if config.kind is IndicatorKind.AREA:
            features = self.feature_map(IndicatorKind.TOTAL)
        else:
            features = self.feature_map(config.kind, config.secondary_threshold)
        kept = np.where(cmap.suspect & scanned, features, 0.0)
        return float(kept.sum() / n_scanned)


def conflict_map(grid: EvidenceGrid, config: IndicatorConfig) -> ConflictMap:
    """
    Binary image of suspect cells under one config.

    The area kind thresholds the total feature, then keeps 8-connected
    components of at least `secondary_threshold` cells.
    """
    return IndicatorEvaluator(grid).conflict_map(config)


def conflict_score(grid: EvidenceGrid, config: IndicatorConfig) -> float:
    return IndicatorEvaluator(grid).conflict_score(config)


def enumerate_configs(kinds: Optional[list[IndicatorKind]] = None) -> list[IndicatorConfig]:
    """
    Every threshold configuration: 355 over all kinds.

    Raises:
        ConfigError: an empty kind selection
    """
    selected = REPORT_ORDER if kinds is None else tuple(k for k in REPORT_ORDER if k in set(kinds))
    if not selected:
        raise ConfigError("indicator selection is empty")
    configs = []
    for kind in selected:
        secondaries = SECONDARY_RANGES[kind].values() if kind in SECONDARY_RANGES else [None]
        for primary in PRIMARY_RANGES[kind].values():
            for secondary in secondaries:
                configs.append(
                    IndicatorConfig(
                        kind=kind, primary_threshold=primary, secondary_threshold=secondary
                    )
                )
    return configs


def configs_per_kind(configs: list[IndicatorConfig]) -> dict[IndicatorKind, int]:
    counts = {kind: 0 for kind in REPORT_ORDER}
    for config in configs:
        counts[config.kind] += 1
    return {kind: n for kind, n in counts.items() if n}
