"""
Tests for image, table, snapshot and run log files.
"""
import numpy as np
import pandas as pd
import pytest
from PIL import Image

from conflictgrid.core.exceptions import OutputError
from conflictgrid.schemas.world import Scenario
from conflictgrid.services.export import (
    FLOAT_FORMAT,
    cell_stats_frame,
    load_grid,
    read_pgm,
    read_run_log,
    save_grid,
    truth_image,
    write_cell_stats,
    write_csv,
    write_grid_images,
    write_pgm,
    write_run_log,
)
from conflictgrid.services.gridmap import rasterize_truth, update_grid
from conflictgrid.services.simworld import generate_run


class TestPgm:
    """Binary greyscale images."""

    def test_bool_image(self, tmp_path):
        image = np.zeros((4, 6), dtype=bool)
        image[0, 1] = True
        path = write_pgm(tmp_path / "mask.pgm", image)
        pixels, scale = read_pgm(path)
        assert pixels.shape == (4, 6)
        assert pixels[0, 1] == 255
        assert pixels.sum() == 255
        assert scale == 1.0

    def test_top_row_is_max_y(self, tmp_path):
        """Grid row 0 (min y) is the last row in the file."""
        image = np.zeros((3, 2), dtype=bool)
        image[0, :] = True
        raw = write_pgm(tmp_path / "rows.pgm", image).read_bytes()
        assert raw[-2:] == b"\xff\xff"
        assert raw[-6:-2] == b"\x00\x00\x00\x00"

    def test_float_scale(self, tmp_path):
        image = np.array([[0.0, 1.0], [2.0, 4.0]])
        path = write_pgm(tmp_path / "f.pgm", image, scale=2.0, comment="test")
        pixels, scale = read_pgm(path)
        assert scale == 2.0
        assert pixels.tolist() == [[0, 128], [255, 255]]
        assert b"# test;" in path.read_bytes()

    def test_standard_reader_sees_header(self, tmp_path):
        """Other tools read the file as plain 8-bit greyscale."""
        path = write_pgm(tmp_path / "wide.pgm", np.ones((4, 6), dtype=bool), comment="mask")
        with Image.open(path) as img:
            assert (img.format, img.mode, img.size) == ("PPM", "L", (6, 4))
        assert path.read_bytes().startswith(b"P5\n# mask;")

    def test_foreign_file_without_scale(self, tmp_path):
        path = tmp_path / "plain.pgm"
        Image.fromarray(np.array([[0, 9], [200, 255]], dtype=np.uint8)).save(path)
        pixels, scale = read_pgm(path)
        assert scale == 1.0
        assert pixels.tolist() == [[200, 255], [0, 9]]

    def test_rejects_3d(self, tmp_path):
        with pytest.raises(ValueError):
            write_pgm(tmp_path / "bad.pgm", np.zeros((2, 2, 2)))

    def test_truth_levels(self, narrow_hallway, small_spec):
        image = truth_image(rasterize_truth(narrow_hallway, small_spec))
        assert set(np.unique(image)) <= {0, 128, 255}
        assert image.dtype == np.uint8

    def test_grid_images(self, tmp_path, small_grid):
        paths = write_grid_images(small_grid, tmp_path, prefix="run-")
        assert [p.name for p in paths] == ["run-occupied.pgm", "run-empty.pgm", "run-conflict.pgm"]
        assert all(p.exists() for p in paths)


class TestCsv:
    """Tables."""

    def test_sorted_and_formatted(self, tmp_path):
        frame = pd.DataFrame({"key": ["b", "a", "c"], "value": [1.0 / 3.0, 2.0, 0.5]})
        path = write_csv(frame, tmp_path / "t.csv", sort_by=["key"])
        lines = path.read_text().splitlines()
        assert lines[0] == "key,value"
        assert lines[1:] == ["a,2", f"b,{FLOAT_FORMAT % (1.0 / 3.0)}", "c,0.5"]

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OutputError):
            write_csv(pd.DataFrame({"a": [1]}), blocker / "nested" / "t.csv")

    def test_cell_stats(self, tmp_path, small_grid, sonar_params, make_reading):
        update_grid(small_grid, [make_reading(0.6, bearing=b) for b in (0.0, 1.0)], sonar_params)
        frame = cell_stats_frame(small_grid)
        assert len(frame) == int(small_grid.scanned.sum())
        assert (frame["n_updates"] >= 1).all()
        assert "con_ge_0.5" in frame.columns

        path = write_cell_stats(small_grid, tmp_path / "cells.csv")
        written = pd.read_csv(path)
        assert written[["cell_y", "cell_x"]].equals(
            written[["cell_y", "cell_x"]].sort_values(["cell_y", "cell_x"]).reset_index(drop=True)
        )


class TestGridSnapshot:
    """npz snapshots."""

    def test_save_load(self, tmp_path, small_grid, sonar_params, make_reading, rng):
        for _ in range(5):
            scan = [make_reading(float(rng.uniform(0.3, 0.9)), bearing=b) for b in (0.0, 2.0)]
            update_grid(small_grid, scan, sonar_params)
        loaded = load_grid(save_grid(small_grid, tmp_path / "grid.npz"))

        assert loaded.spec == small_grid.spec
        assert loaded.sensor == small_grid.sensor
        assert loaded.con_generated == small_grid.con_generated
        for name in ("n_updates", "total_con", "seq_len", "gambino_count"):
            assert np.array_equal(getattr(loaded, name), getattr(small_grid, name))
        assert np.array_equal(loaded.dempster.o, small_grid.dempster.o)
        assert np.array_equal(loaded.smets.c, small_grid.smets.c)
        for magnitude in small_grid.magnitudes:
            assert np.array_equal(
                loaded.magnitude_counts[magnitude], small_grid.magnitude_counts[magnitude]
            )


class TestRunLog:
    """JSON-lines run logs."""

    def test_write_read(self, tmp_path, narrow_hallway, sonar_params):
        run = generate_run(Scenario(environment=narrow_hallway, sensor=sonar_params), seed=2)
        path = write_run_log(run, tmp_path / "logs" / "run.jsonl")
        lines = path.read_text().splitlines()
        assert len(lines) == 61
        assert '"kind":"header"' in lines[0]
        assert read_run_log(path) == run

    def test_missing_header(self, tmp_path, narrow_hallway, sonar_params):
        run = generate_run(Scenario(environment=narrow_hallway, sensor=sonar_params), seed=2)
        path = write_run_log(run, tmp_path / "run.jsonl")
        path.write_text("\n".join(path.read_text().splitlines()[1:]))
        with pytest.raises(ValueError):
            read_run_log(path)
