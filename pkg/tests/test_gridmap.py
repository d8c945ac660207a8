"""
Tests for the evidence grid: updates, bookkeeping and scoring against truth.
"""
import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from conflictgrid.core.exceptions import ConfigError, GridDimensionError, ScanError
from conflictgrid.schemas.evidence import BeliefMass
from conflictgrid.schemas.grid import CellStats, GridSpec, TruthLabel
from conflictgrid.schemas.sensor import Pose, SensorModelParams
from conflictgrid.schemas.world import Environment, WallSegment
from conflictgrid.services.gridmap import (
    EvidenceGrid,
    TruthGrid,
    error_image,
    error_score,
    gambino_trigger,
    rasterize_truth,
    update_grid,
)
from conflictgrid.services.evidence import MassArrays, conjunctive_arrays
from conflictgrid.services.sensor_models import cells_in_footprint

# One reading's evidence for a cell: (supports occupied, strength).
readings = st.lists(st.tuples(st.booleans(), st.floats(0.0, 0.98)), min_size=1, max_size=60)


def _line_beam(params: SensorModelParams) -> SensorModelParams:
    return params.model_copy(update={"half_angle": 0.0})


def _centre_pose(spec: GridSpec, ix: int, iy: int) -> Pose:
    x, y = spec.cell_center(ix, iy)
    return Pose(x=x, y=y, heading=0.0)


def _random_scan(rng, spec, params, make_reading):
    pose = Pose(
        x=float(rng.uniform(-0.5, 0.5)),
        y=float(rng.uniform(-0.5, 0.5)),
        heading=float(rng.uniform(-math.pi, math.pi)),
    )
    scan = []
    for bearing in params.bearings():
        if rng.random() < 0.2:
            scan.append(make_reading(params.max_range, bearing, pose, at_max_range=True))
        else:
            scan.append(make_reading(float(rng.uniform(0.2, 1.2)), bearing, pose))
    return scan


class TestUpdateGrid:
    """Per-scan combination and conflict bookkeeping."""

    def test_vacuous_grid_first_scan_has_no_conflict(self, small_grid, sonar_params, make_reading):
        """Vacuous beliefs cannot conflict."""
        scan = [make_reading(0.6, b) for b in sonar_params.bearings()]
        summary = update_grid(small_grid, scan, sonar_params)
        assert summary.total_con == 0.0
        assert summary.cells_touched > 0
        assert small_grid.n_conflicting.sum() == 0
        assert small_grid.scanned.sum() > 0

    def test_con_from_prior_belief(self, small_spec, sonar_params, make_reading):
        """Con is measured between the prior Dempster belief and the new evidence."""
        params = _line_beam(sonar_params)
        grid = EvidenceGrid(spec=small_spec, sensor=params)
        pose = _centre_pose(small_spec, 5, 10)
        target = (8, 10)
        grid.set_belief(*target, BeliefMass.from_masses(occupied=0.8))
        assert grid.belief(*target) == BeliefMass.from_masses(occupied=0.8)

        reading = make_reading(1.0, 0.0, pose)
        footprint = cells_in_footprint(reading, params, small_spec)
        cell = next(c for c in footprint if (c.ix, c.iy) == target)
        strength = ((params.max_range - cell.r) / params.max_range + 1.0) / 2.0
        update_grid(grid, [reading], params)

        k = 0.8 * strength
        expected = -math.log(1.0 - k)
        assert grid.total_con[target[1], target[0]] == pytest.approx(expected, abs=1e-12)
        assert grid.n_conflicting[target[1], target[0]] == 1
        after = grid.belief(*target)
        assert after.m_occupied < 0.8
        assert after.m_empty > 0.0
        assert grid.seq_len[target[1], target[0]] == 1

    def test_gambino_trigger(self, small_spec, sonar_params, make_reading):
        """A confident Smets cell contradicted by ≥ 0.10 of new ∅ mass counts once."""
        params = _line_beam(sonar_params)
        grid = EvidenceGrid(spec=small_spec, sensor=params)
        target = (8, 10)
        prior = BeliefMass.from_masses(occupied=0.6, conflict=0.05)
        grid.set_belief(*target, BeliefMass.from_masses(occupied=0.6), smets=prior)
        update_grid(grid, [make_reading(1.0, 0.0, _centre_pose(small_spec, 5, 10))], params)
        assert grid.gambino_count[target[1], target[0]] == 1
        assert grid.smets.c[target[1], target[0]] > 0.15

    def test_gambino_needs_confidence(self, small_spec, sonar_params, make_reading):
        """An unsure Smets cell does not trigger."""
        params = _line_beam(sonar_params)
        grid = EvidenceGrid(spec=small_spec, sensor=params)
        target = (8, 10)
        grid.set_belief(*target, BeliefMass.from_masses(occupied=0.45))
        update_grid(grid, [make_reading(1.0, 0.0, _centre_pose(small_spec, 5, 10))], params)
        assert grid.gambino_count[target[1], target[0]] == 0
        assert grid.n_conflicting[target[1], target[0]] == 1

    def test_sequence_resets_on_agreement(self, small_spec, sonar_params, make_reading):
        """A non-conflicting update ends the trailing conflicting run."""
        params = _line_beam(sonar_params)
        grid = EvidenceGrid(spec=small_spec, sensor=params)
        target = (8, 10)
        grid.set_belief(*target, BeliefMass.from_masses(occupied=0.5))
        pose = _centre_pose(small_spec, 5, 10)
        update_grid(grid, [make_reading(1.0, 0.0, pose)], params)
        assert grid.seq_len[target[1], target[0]] == 1
        # Vacuate the cell so the next update cannot conflict.
        grid.set_belief(*target, BeliefMass.vacuous())
        update_grid(grid, [make_reading(1.0, 0.0, pose)], params)
        assert grid.seq_len[target[1], target[0]] == 0
        assert grid.seq_sum[target[1], target[0]] == 0.0
        assert grid.n_conflicting[target[1], target[0]] == 1
        assert grid.n_updates[target[1], target[0]] == 2

    def test_sensor_kind_mismatch(self, small_grid, laser_params, make_reading):
        """Laser readings cannot update a sonar grid."""
        with pytest.raises(ConfigError):
            update_grid(small_grid, [make_reading(1.0)], laser_params)

    def test_scan_must_share_pose(self, small_grid, sonar_params, make_reading):
        """Readings from two poses are not one scan."""
        scan = [make_reading(1.0), make_reading(1.0, pose=Pose(x=0.2, y=0.0))]
        with pytest.raises(ScanError):
            update_grid(small_grid, scan, sonar_params)

    def test_invariants_after_random_scans(self, small_spec, sonar_params, make_reading, rng):
        """CellStats invariants and mass sums hold on every cell after many scans."""
        grid = EvidenceGrid(spec=small_spec, sensor=sonar_params)
        generated = 0.0
        for _ in range(25):
            generated += update_grid(
                grid, _random_scan(rng, small_spec, sonar_params, make_reading), sonar_params
            ).total_con
        for iy, ix in zip(*np.nonzero(grid.scanned)):
            assert isinstance(grid.cell_stats(int(ix), int(iy)), CellStats)
        for masses in (grid.dempster, grid.smets):
            total = masses.o + masses.e + masses.t + masses.c
            assert np.allclose(total, 1.0, atol=1e-9)
            assert (masses.o >= 0).all() and (masses.e >= 0).all() and (masses.t >= -1e-12).all()
        assert (grid.dempster.c == 0.0).all()
        assert grid.total_con.sum() == pytest.approx(generated, rel=1e-9)
        assert grid.con_generated == pytest.approx(generated, rel=1e-12)

    def test_replay_is_bit_identical(self, small_spec, sonar_params, make_reading):
        """Same scans, same arrays."""
        grids = []
        for _ in range(2):
            local = np.random.default_rng(3)
            grid = EvidenceGrid(spec=small_spec, sensor=sonar_params)
            for _ in range(10):
                scan = _random_scan(local, small_spec, sonar_params, make_reading)
                update_grid(grid, scan, sonar_params)
            grids.append(grid)
        a, b = grids
        for name in ("total_con", "max_con", "seq_sum", "n_updates", "gambino_count"):
            assert np.array_equal(getattr(a, name), getattr(b, name))
        assert np.array_equal(a.dempster.o, b.dempster.o)
        assert np.array_equal(a.smets.c, b.smets.c)


class TestGambinoTrigger:
    """The trigger rule on its own, over Smets states."""

    @staticmethod
    def _count(sequence) -> int:
        state = MassArrays(np.zeros(1), np.zeros(1), np.ones(1), np.zeros(1))
        count = 0
        for occupied, strength in sequence:
            s = np.array([strength])
            zero = np.zeros(1)
            evidence = MassArrays(s if occupied else zero, zero if occupied else s, 1.0 - s, zero)
            post = conjunctive_arrays(state, evidence)
            count += int(gambino_trigger(state, post)[0])
            state = post
        return count

    def test_confident_cell_contradicted(self):
        prior = MassArrays(np.array([0.6]), np.zeros(1), np.array([0.35]), np.array([0.05]))
        evidence = MassArrays(np.zeros(1), np.array([0.5]), np.array([0.5]), np.zeros(1))
        assert gambino_trigger(prior, conjunctive_arrays(prior, evidence))[0]

    def test_small_rise_does_not_count(self):
        prior = MassArrays(np.array([0.9]), np.zeros(1), np.array([0.1]), np.zeros(1))
        evidence = MassArrays(np.zeros(1), np.array([0.1]), np.array([0.9]), np.zeros(1))
        assert not gambino_trigger(prior, conjunctive_arrays(prior, evidence))[0]

    def test_alternating_strong_evidence(self):
        """Flip-flopping readings stop counting once ∅ passes one half."""
        assert 2 <= self._count([(True, 0.9), (False, 0.3), (True, 0.3), (False, 0.3)] * 10) <= 6

    @settings(max_examples=300, deadline=None)
    @given(readings)
    def test_trigger_count_is_bounded(self, sequence):
        """No evidence sequence makes one cell trigger more than six times."""
        assert self._count(sequence) <= 6


class TestErrorScore:
    """Grid error against truth."""

    def _truth(self, spec, label=TruthLabel.EXCLUDED):
        return TruthGrid(spec=spec, labels=np.full(spec.shape, label, dtype=np.int8))

    def test_single_cell(self, small_grid, small_spec):
        """(O:0.7, E:0.1) against occupied truth scores 0.3."""
        truth = self._truth(small_spec)
        truth.labels[4, 3] = TruthLabel.OCCUPIED
        small_grid.set_belief(3, 4, BeliefMass.from_masses(occupied=0.7, empty=0.1))
        small_grid.n_updates[4, 3] = 1
        assert error_score(small_grid, truth) == pytest.approx(0.3, abs=1e-12)

    def test_unscanned_cells_excluded(self, small_grid, small_spec):
        """Nothing scanned, nothing scored."""
        truth = self._truth(small_spec, TruthLabel.OCCUPIED)
        assert error_score(small_grid, truth) == 0.0

    def test_perfect_grid(self, small_grid, small_spec):
        """A grid matching truth on all scanned cells scores 0."""
        truth = self._truth(small_spec, TruthLabel.EMPTY)
        truth.labels[:, :5] = TruthLabel.OCCUPIED
        small_grid.dempster.e[:, 5:] = 1.0
        small_grid.dempster.t[:, 5:] = 0.0
        small_grid.dempster.o[:, :5] = 1.0
        small_grid.dempster.t[:, :5] = 0.0
        small_grid.n_updates[:] = 1
        assert error_score(small_grid, truth) == 0.0
        assert not error_image(small_grid, truth).any()

    def test_dimension_mismatch(self, small_grid):
        """Grids of different sizes cannot be compared."""
        truth = self._truth(GridSpec(side_length=1.0))
        with pytest.raises(GridDimensionError):
            error_score(small_grid, truth)


class TestErrorImage:
    """Otsu binarization of the error image."""

    def test_bimodal_errors(self, small_grid, small_spec):
        """Half the cells at 0.05 and half at 0.9: exactly the 0.9 cells light up."""
        labels = np.full(small_spec.shape, TruthLabel.EMPTY, dtype=np.int8)
        truth = TruthGrid(spec=small_spec, labels=labels)
        small_grid.n_updates[:] = 1
        small_grid.dempster.e[:] = 0.95
        small_grid.dempster.t[:] = 0.05
        small_grid.dempster.e[:, 10:] = 0.1
        small_grid.dempster.t[:, 10:] = 0.9
        image = error_image(small_grid, truth)
        assert image[:, 10:].all()
        assert not image[:, :10].any()

    def test_constant_image_is_empty(self, small_grid, small_spec):
        """A uniform error image highlights nothing."""
        labels = np.full(small_spec.shape, TruthLabel.OCCUPIED, dtype=np.int8)
        truth = TruthGrid(spec=small_spec, labels=labels)
        small_grid.n_updates[:] = 1
        assert not error_image(small_grid, truth).any()

    def test_single_cell_against_background(self, small_grid, small_spec):
        """One scanned cell at 0.8 stands out from the zero background."""
        labels = np.full(small_spec.shape, TruthLabel.EMPTY, dtype=np.int8)
        truth = TruthGrid(spec=small_spec, labels=labels)
        small_grid.n_updates[2, 2] = 1
        small_grid.set_belief(2, 2, BeliefMass.from_masses(occupied=0.8))
        image = error_image(small_grid, truth)
        assert image[2, 2]
        assert image.sum() == 1


class TestRasterizeTruth:
    """Ground truth from hallway geometry."""

    def test_narrow_hallway(self, narrow_hallway):
        """Occupied wall bands, empty interior, excluded elsewhere."""
        spec = GridSpec()
        truth = rasterize_truth(narrow_hallway, spec)
        assert truth.shape == (276, 276)
        ix, iy = spec.world_to_cell(3.0, 0.0)
        assert truth.labels[iy, ix] == TruthLabel.EMPTY
        ix, iy = spec.world_to_cell(3.0, 0.9)
        assert truth.labels[iy, ix] == TruthLabel.OCCUPIED
        ix, iy = spec.world_to_cell(3.0, -0.9)
        assert truth.labels[iy, ix] == TruthLabel.OCCUPIED
        ix, iy = spec.world_to_cell(3.0, 2.0)
        assert truth.labels[iy, ix] == TruthLabel.EXCLUDED

    def test_interior_matches_point_in_polygon(self, narrow_hallway):
        """Cells that are not walls are empty exactly when their centre is inside."""
        spec = GridSpec(side_length=14.0)
        truth = rasterize_truth(narrow_hallway, spec)
        polygon = shapely.Polygon(narrow_hallway.vertices())
        inside = 0
        for iy in range(spec.cells):
            for ix in range(spec.cells):
                if polygon.contains(shapely.Point(spec.cell_center(ix, iy))):
                    inside += 1
                    assert truth.labels[iy, ix] in (TruthLabel.EMPTY, TruthLabel.OCCUPIED)
                else:
                    assert truth.labels[iy, ix] != TruthLabel.EMPTY
        n_walls = int((truth.labels == TruthLabel.OCCUPIED).sum())
        n_empty = int((truth.labels == TruthLabel.EMPTY).sum())
        assert n_empty <= inside <= n_empty + n_walls

    def test_degenerate_environment(self):
        """A zero-area corridor leaves every cell excluded."""
        env = Environment(
            name="flat",
            width=1.0,
            length=1.0,
            walls=[
                WallSegment(start=(0.0, 0.0), end=(1.0, 0.0)),
                WallSegment(start=(1.0, 0.0), end=(0.0, 0.0)),
            ],
        )
        truth = rasterize_truth(env, GridSpec(side_length=4.0))
        assert (truth.labels == TruthLabel.EXCLUDED).all()
