"""
File formats: PGM images, CSV tables, grid snapshots and run logs.
"""
import io
import json
import re
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import pandas as pd
import structlog
from PIL import Image

from conflictgrid.core.exceptions import OutputError
from conflictgrid.schemas.grid import GridSpec, TruthLabel
from conflictgrid.schemas.sensor import SensorModelParams
from conflictgrid.schemas.world import RunHeader, RunLog, ScanRecord
from conflictgrid.services.evidence import MassArrays
from conflictgrid.services.gridmap import EvidenceGrid, TruthGrid

logger = structlog.get_logger(__name__)

FLOAT_FORMAT = "%.12g"
PGM_MAXVAL = 255
TRUTH_LEVELS = {TruthLabel.EMPTY: 0, TruthLabel.OCCUPIED: 255, TruthLabel.EXCLUDED: 128}
_SCALE_RE = re.compile(r"scale=([0-9.eE+-]+)")

_STAT_FIELDS = (
    "n_updates",
    "n_conflicting",
    "total_con",
    "max_con",
    "seq_sum",
    "seq_len",
    "gambino_count",
)


def _ensure_parent(path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(str(path.parent), f"Cannot create directory {path.parent}: {e}") from e


def _write_bytes(path: Path, payload: bytes) -> None:
    _ensure_parent(path)
    try:
        path.write_bytes(payload)
    except OSError as e:
        raise OutputError(str(path), f"Cannot write {path}: {e}") from e


def write_pgm(
    path: str | Path, image: np.ndarray, scale: float = 1.0, comment: Optional[str] = None
) -> Path:
    """
    Write an 8-bit binary PGM (P5) with row 0 at the top of the world (max y).

    Boolean images map to 0/255. Float images map linearly, byte = value/scale*255,
    and the comment line records the scale. uint8 images are written as is.
    """
    path = Path(path)
    data = np.asarray(image)
    if data.ndim != 2:
        raise ValueError(f"PGM needs a 2-D image, got shape {data.shape}")
    if data.dtype == np.bool_:
        pixels = np.where(data, PGM_MAXVAL, 0).astype(np.uint8)
        scale = 1.0
    elif data.dtype == np.uint8:
        pixels = data
        scale = float(PGM_MAXVAL)
    else:
        pixels = np.rint(np.clip(data / scale, 0.0, 1.0) * PGM_MAXVAL).astype(np.uint8)

    note = f"value = byte / {PGM_MAXVAL} * scale; scale={scale:.12g}"
    if comment:
        note = f"{comment}; {note}"
    buffer = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(np.flipud(pixels))).save(buffer, format="PPM")
    # Pillow writes no comments; the scale line goes right after the magic number.
    magic, rest = buffer.getvalue().split(b"\n", 1)
    _write_bytes(path, magic + b"\n# " + note.encode("ascii", "replace") + b"\n" + rest)
    return path


def read_pgm(path: str | Path) -> tuple[np.ndarray, float]:
    """Read a PGM back into grid orientation; returns (bytes, scale)."""
    path = Path(path)
    with Image.open(path) as img:
        if img.mode != "L":
            raise ValueError(f"{path} is not an 8-bit greyscale image")
        pixels = np.asarray(img, dtype=np.uint8)
    scale = 1.0
    with path.open("rb") as fh:
        fh.readline()
        second = fh.readline()
    if second.startswith(b"#"):
        match = _SCALE_RE.search(second.decode("ascii", "replace"))
        if match:
            scale = float(match.group(1))
    return np.flipud(pixels).copy(), scale


def truth_image(truth: TruthGrid) -> np.ndarray:
    image = np.zeros(truth.shape, dtype=np.uint8)
    for label, level in TRUTH_LEVELS.items():
        image[truth.labels == label] = level
    return image


def write_grid_images(grid: EvidenceGrid, directory: str | Path, prefix: str = "") -> list[Path]:
    """Belief images m(O), m(E) (Dempster) and m(∅) (Smets), scaled to [0, 1]."""
    directory = Path(directory)
    return [
        write_pgm(directory / f"{prefix}occupied.pgm", grid.dempster.o, comment="m(O)"),
        write_pgm(directory / f"{prefix}empty.pgm", grid.dempster.e, comment="m(E)"),
        write_pgm(directory / f"{prefix}conflict.pgm", grid.smets.c, comment="Smets m(empty set)"),
    ]


def write_csv(frame: pd.DataFrame, path: str | Path, sort_by: Optional[list[str]] = None) -> Path:
    """Write a table with rows sorted by their key and fixed float formatting."""
    path = Path(path)
    if sort_by:
        frame = frame.sort_values(sort_by, kind="mergesort").reset_index(drop=True)
    _ensure_parent(path)
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise OutputError(str(path), f"Cannot write {path}: {e}") from e
    logger.debug("Table written", path=str(path), rows=len(frame))
    return path


def cell_stats_frame(grid: EvidenceGrid) -> pd.DataFrame:
    """One row per updated cell."""
    iy, ix = np.nonzero(grid.scanned)
    columns: dict[str, np.ndarray] = {"cell_x": ix, "cell_y": iy}
    for name in _STAT_FIELDS:
        columns[name] = getattr(grid, name)[iy, ix]
    for magnitude, counts in grid.magnitude_counts.items():
        columns[f"con_ge_{magnitude:g}"] = counts[iy, ix]
    return pd.DataFrame(columns)


def write_cell_stats(grid: EvidenceGrid, path: str | Path) -> Path:
    return write_csv(cell_stats_frame(grid), path, sort_by=["cell_y", "cell_x"])


def save_grid(grid: EvidenceGrid, path: str | Path) -> Path:
    """Snapshot every belief and statistics array to .npz."""
    path = Path(path)
    meta = {
        "spec": grid.spec.model_dump(),
        "sensor": grid.sensor.model_dump(mode="json"),
        "magnitudes": list(grid.magnitudes),
        "con_generated": grid.con_generated,
        "saturations": grid.saturations,
    }
    arrays: dict[str, np.ndarray] = {}
    for prefix, masses in (("dempster", grid.dempster), ("smets", grid.smets)):
        for name, values in masses._asdict().items():
            arrays[f"{prefix}_{name}"] = values
    for name in _STAT_FIELDS:
        arrays[name] = getattr(grid, name)
    for i, magnitude in enumerate(grid.magnitudes):
        arrays[f"magnitude_{i}"] = grid.magnitude_counts[magnitude]

    _ensure_parent(path)
    try:
        with path.open("wb") as fh:
            np.savez_compressed(fh, meta=np.array(json.dumps(meta)), **arrays)
    except OSError as e:
        raise OutputError(str(path), f"Cannot write {path}: {e}") from e
    return path


def load_grid(path: str | Path) -> EvidenceGrid:
    with np.load(Path(path)) as data:
        meta = json.loads(data["meta"].item())
        grid = EvidenceGrid(
            spec=GridSpec.model_validate(meta["spec"]),
            sensor=SensorModelParams.model_validate(meta["sensor"]),
            magnitudes=tuple(meta["magnitudes"]),
        )
        for prefix in ("dempster", "smets"):
            masses = MassArrays(*(data[f"{prefix}_{n}"].copy() for n in MassArrays._fields))
            setattr(grid, prefix, masses)
        for name in _STAT_FIELDS:
            setattr(grid, name, data[name].copy())
        for i, magnitude in enumerate(grid.magnitudes):
            grid.magnitude_counts[magnitude] = data[f"magnitude_{i}"].copy()
    grid.con_generated = float(meta["con_generated"])
    grid.saturations = int(meta["saturations"])
    return grid


def write_run_log(run: RunLog, path: str | Path) -> Path:
    """JSON lines: a header record, then one record per scan."""
    path = Path(path)
    lines = [run.header.model_dump_json()]
    lines.extend(record.model_dump_json() for record in run.records)
    _write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))
    return path


def iter_run_log(path: str | Path) -> Iterable[dict]:
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def read_run_log(path: str | Path) -> RunLog:
    header: Optional[RunHeader] = None
    records: list[ScanRecord] = []
    for entry in iter_run_log(path):
        if entry.get("kind") == "header":
            header = RunHeader.model_validate(entry)
        else:
            records.append(ScanRecord.model_validate(entry))
    if header is None:
        raise ValueError(f"{path} has no header record")
    return RunLog(header=header, records=records)


def write_text(text: str, path: str | Path) -> Path:
    path = Path(path)
    _write_bytes(path, text.encode("utf-8"))
    return path
