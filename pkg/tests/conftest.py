"""
Pytest configuration and fixtures.
"""

import numpy as np
import pytest

from conflictgrid.schemas.experiment import ExperimentConfig
from conflictgrid.schemas.grid import GridSpec
from conflictgrid.schemas.indicator import IndicatorKind, SensorMeta
from conflictgrid.schemas.sensor import Pose, RangeReading, SensorKind, SensorModelParams
from conflictgrid.schemas.world import AnomalyParams, Environment, build_hallway, default_hallways
from conflictgrid.services.gridmap import EvidenceGrid


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so random batches reproduce."""
    return np.random.default_rng(20060)


@pytest.fixture
def sonar_params() -> SensorModelParams:
    return SensorModelParams.sonar()


@pytest.fixture
def laser_params() -> SensorModelParams:
    return SensorModelParams.laser()


@pytest.fixture
def small_spec() -> GridSpec:
    """A 20 x 20 grid of 10.16 cm cells centred on the origin."""
    return GridSpec(side_length=20 * 0.1016, cell_size=0.1016)


@pytest.fixture
def small_grid(small_spec: GridSpec, sonar_params: SensorModelParams) -> EvidenceGrid:
    return EvidenceGrid(spec=small_spec, sensor=sonar_params)


@pytest.fixture
def sonar_meta() -> SensorMeta:
    return SensorMeta(angular_resolution_deg=22.5, range_resolution=1.0, mean_update_rate=2.0)


@pytest.fixture
def narrow_hallway() -> Environment:
    return build_hallway("narrow", 1.8, 11.2)


@pytest.fixture
def window_hallway() -> Environment:
    return build_hallway("window", 2.0, 27.0, glass_pane=2.0)


@pytest.fixture
def clean_anomaly() -> AnomalyParams:
    """Anomalies off and no noise."""
    return AnomalyParams.disabled()


@pytest.fixture
def origin_pose() -> Pose:
    return Pose(x=0.0, y=0.0, heading=0.0)


@pytest.fixture
def make_reading():
    """Factory for single readings from a pose."""

    def _make(
        range_: float,
        bearing: float = 0.0,
        pose: Pose | None = None,
        at_max_range: bool = False,
    ) -> RangeReading:
        return RangeReading(
            sensor_pose=pose or Pose(x=0.0, y=0.0, heading=0.0),
            beam_bearing=bearing,
            range=range_,
            at_max_range=at_max_range,
        )

    return _make


@pytest.fixture
def small_config(tmp_path) -> ExperimentConfig:
    """One hallway, one sonar run, two indicator kinds, in-process."""
    return ExperimentConfig(
        hallways=[default_hallways()[0]],
        sensors=[SensorKind.SONAR],
        seeds=[7],
        indicator_kinds=[IndicatorKind.GAMBINO, IndicatorKind.TOTAL],
        output_dir=str(tmp_path / "results"),
        workers=1,
    )


@pytest.fixture
def clean_config(small_config: ExperimentConfig) -> ExperimentConfig:
    return small_config.model_copy(update={"anomaly": AnomalyParams.disabled()})
