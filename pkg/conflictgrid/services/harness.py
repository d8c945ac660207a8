"""
Experiment protocol: replay runs into grids, sweep indicator configs, report.
"""
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd
import structlog

from conflictgrid.core.exceptions import (
    ConfigError,
    ExperimentMismatchError,
    UndefinedStatisticError,
)
from conflictgrid.schemas.experiment import ExperimentConfig, SampleRecord
from conflictgrid.schemas.indicator import IndicatorConfig, IndicatorKind
from conflictgrid.schemas.world import RunLog
from conflictgrid.services.evaluation import (
    GridClass,
    IsolationScorer,
    classify_grids,
    discover_error_threshold,
    fld,
    pearson,
)
from conflictgrid.services.export import write_csv, write_pgm, write_text
from conflictgrid.services.gridmap import (
    EvidenceGrid,
    error_image,
    error_score,
    rasterize_truth,
    update_grid,
)
from conflictgrid.services.indicators import REPORT_ORDER, IndicatorEvaluator, enumerate_configs
from conflictgrid.services.simworld import count_anomalies

logger = structlog.get_logger(__name__)

SAMPLE_EPS = 1e-9
SWEEP_KEY = ["run_id", "sample_index", "kind", "primary_threshold", "secondary_threshold"]
SCOPES = ("sonar", "laser", "pooled")
TESTS = ("estimation", "isolation", "classification")


def _check_run(config: ExperimentConfig, run: RunLog) -> None:
    scenario = run.header.scenario
    env = scenario.environment
    kind = scenario.sensor.kind
    try:
        expected_env = config.hallway(env.name)
    except KeyError:
        raise ExperimentMismatchError(f"hallway {env.name!r} is not part of the experiment")
    if expected_env != env:
        raise ExperimentMismatchError(f"hallway {env.name!r} differs from the configured one")
    if kind not in config.sensors or config.sensor_params[kind] != scenario.sensor:
        raise ExperimentMismatchError(f"{kind.value} parameters differ from the configuration")
    last = run.records[-1].distance
    if last < config.sample_distances[-1] - SAMPLE_EPS:
        raise ExperimentMismatchError(
            f"run ends at {last} m before the last sample at {config.sample_distances[-1]} m"
        )


def _selected_configs(config: ExperimentConfig) -> list[IndicatorConfig]:
    configs = enumerate_configs(config.indicator_kinds)
    tracked = set(config.magnitudes)
    for item in configs:
        if item.kind is IndicatorKind.INCREASE_FREQUENCY and not any(
            abs(item.secondary_threshold - m) <= 1e-9 for m in tracked  # type: ignore[operator]
        ):
            raise ConfigError(
                f"{item.key} needs magnitude {item.secondary_threshold:g}, "
                f"tracked magnitudes are {sorted(tracked)}"
            )
    return configs


def _score_sample(
    config: ExperimentConfig,
    grid: EvidenceGrid,
    truth_error: float,
    image: np.ndarray,
    configs: list[IndicatorConfig],
    base: dict,
) -> list[SampleRecord]:
    evaluator = IndicatorEvaluator(grid)
    isolation = IsolationScorer(image, c=config.delta2_c, domain=config.delta2_domain)
    records = []
    for item in configs:
        cmap = evaluator.conflict_map(item)
        records.append(
            SampleRecord(
                **base,
                indicator=item.key,
                kind=item.kind,
                primary_threshold=item.primary_threshold,
                secondary_threshold=item.secondary_threshold,
                error=truth_error,
                conflict_score=evaluator.conflict_score(item, cmap),
                delta2=isolation.score(cmap.suspect).value,
                suspect_cells=cmap.count,
            )
        )
    return records


def run_experiment(
    config: ExperimentConfig,
    run: RunLog,
    run_id: Optional[str] = None,
    output_dir: Optional[str | Path] = None,
) -> list[SampleRecord]:
    """
    Replay a run into a fresh grid and score it at every sample distance.

    At each sample the grid's error score and error image are computed once and
    every selected indicator config contributes one record.

    Raises:
        ExperimentMismatchError: the run does not belong to this experiment
    """
    _check_run(config, run)
    scenario = run.header.scenario
    env = scenario.environment
    params = scenario.sensor
    seed = run.header.seed
    run_id = run_id or f"{env.name}-{params.kind.value}-{seed}"
    log = logger.bind(run_id=run_id, hallway=env.name, sensor=params.kind.value, seed=seed)
    started = time.perf_counter()

    configs = _selected_configs(config)
    designated = config.designated_indicator
    grid = EvidenceGrid(spec=config.grid, sensor=params, magnitudes=tuple(config.magnitudes))
    truth = rasterize_truth(env, config.grid)
    image_dir = Path(output_dir) / "images" / run_id if output_dir and config.write_images else None

    samples = config.sample_distances
    next_sample = 0
    records: list[SampleRecord] = []
    for scan in run.records:
        update_grid(grid, scan.readings, params)
        while next_sample < len(samples) and scan.distance >= samples[next_sample] - SAMPLE_EPS:
            truth_error = error_score(grid, truth)
            image = error_image(grid, truth)
            base = {
                "run_id": run_id,
                "hallway": env.name,
                "sensor": params.kind,
                "seed": seed,
                "sample_index": next_sample,
                "distance": samples[next_sample],
            }
            records.extend(_score_sample(config, grid, truth_error, image, configs, base))
            if image_dir is not None:
                write_pgm(image_dir / f"error_{next_sample:02d}.pgm", image, comment="error image")
                cmap = IndicatorEvaluator(grid).conflict_map(designated)
                write_pgm(
                    image_dir / f"conflict_{next_sample:02d}.pgm",
                    cmap.suspect,
                    comment=f"conflict map {designated.key}",
                )
            log.debug("Sample scored", distance=samples[next_sample], error=truth_error)
            next_sample += 1

    if next_sample < len(samples):
        raise ExperimentMismatchError(
            f"run {run_id} reached only {next_sample} of {len(samples)} samples"
        )

    recorded = float(grid.total_con.sum())
    if not math.isclose(recorded, grid.con_generated, rel_tol=1e-9, abs_tol=1e-9):
        log.warning("Con bookkeeping drift", generated=grid.con_generated, recorded=recorded)
    log.info(
        "Run scored",
        records=len(records),
        total_con=grid.con_generated,
        saturations=grid.saturations,
        anomalies=sum(count_anomalies(run).values()),
        duration_s=round(time.perf_counter() - started, 3),
    )
    return records


def _jobs(config: ExperimentConfig) -> list:
    from conflictgrid.tasks.experiment_runs import RunJob

    return [
        RunJob(config=config, hallway=env.name, sensor=sensor, seed=seed)
        for env in config.hallways
        for sensor in config.sensors
        for seed in config.seeds
    ]


def sweep(config: ExperimentConfig, write: bool = True) -> pd.DataFrame:
    """
    Run the whole protocol: every hallway x sensor x seed, every selected config.

    Runs fan out over a process pool of `config.effective_workers`; one worker runs
    in process. Rows are sorted by their full key, so the table does not depend on
    completion order.

    Raises:
        OutputError: the output directory cannot be written
    """
    from conflictgrid.tasks.experiment_runs import process_run

    jobs = _jobs(config)
    workers = min(config.effective_workers, len(jobs))
    logger.info("Starting sweep", runs=len(jobs), workers=workers, output_dir=config.output_dir)
    started = time.perf_counter()

    rows: list[dict] = []
    if workers <= 1:
        for job in jobs:
            rows.extend(process_run(job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for result in pool.map(process_run, jobs):
                rows.extend(result)

    frame = pd.DataFrame(rows, columns=list(SampleRecord.model_fields))
    frame = frame.sort_values(SWEEP_KEY, kind="mergesort", na_position="first")
    frame = frame.reset_index(drop=True)
    if write:
        write_csv(frame, Path(config.output_dir) / "sweep.csv")
    logger.info(
        "Sweep finished",
        rows=len(frame),
        duration_s=round(time.perf_counter() - started, 3),
    )
    return frame


@dataclass
class Report:
    summary: pd.DataFrame
    classification: pd.DataFrame
    configured_threshold: float
    discovered_threshold: Optional[float]
    text: str


def _undefined_safe(statistic: Callable[..., float], *args: object) -> float:
    try:
        return statistic(*args)
    except UndefinedStatisticError:
        return math.nan


def _per_config(frame: pd.DataFrame, threshold: float) -> pd.DataFrame:
    """Estimation, isolation and classification values of every config in a scope."""
    rows = []
    for (kind, key), group in frame.groupby(["kind", "indicator"], sort=True):
        scores = group["conflict_score"].to_numpy(dtype=np.float64)
        errors = group["error"].to_numpy(dtype=np.float64)
        inaccurate = np.fromiter(
            (c is GridClass.INACCURATE for c in classify_grids(errors, threshold)),
            dtype=bool,
            count=errors.size,
        )
        rows.append(
            {
                "kind": kind,
                "indicator": key,
                "estimation": _undefined_safe(pearson, scores, errors),
                "isolation": float(group["delta2"].mean()),
                "classification": _undefined_safe(
                    fld,
                    scores[~inaccurate],
                    scores[inaccurate],
                ),
            }
        )
    return pd.DataFrame(rows, columns=["kind", "indicator", *TESTS])


def _summarize(values: np.ndarray, test: str) -> dict:
    defined = values[~np.isnan(values)]
    n_undefined = int(values.size - defined.size)
    if defined.size == 0:
        return {
            "mean": math.nan,
            "variance": math.nan,
            "best": math.nan,
            "best_abs": math.nan,
            "n_undefined": n_undefined,
        }
    with np.errstate(invalid="ignore"):
        mean = float(defined.mean())
        variance = float(defined.var())
    # Δ² is a distance; the other two tests improve upward.
    best = float(defined.min()) if test == "isolation" else float(defined.max())
    return {
        "mean": mean,
        "variance": variance,
        "best": best,
        "best_abs": float(np.abs(defined).max()) if test == "estimation" else math.nan,
        "n_undefined": n_undefined,
    }


def _scope_frame(frame: pd.DataFrame, scope: str) -> pd.DataFrame:
    return frame if scope == "pooled" else frame[frame["sensor"] == scope]


def _classification_rows(frame: pd.DataFrame, config: ExperimentConfig) -> pd.DataFrame:
    key = config.designated_indicator.key
    threshold = config.classification_threshold
    rows = []
    for scope in SCOPES:
        subset = _scope_frame(frame, scope)
        subset = subset[subset["indicator"] == key]
        inaccurate = subset["error"].to_numpy(dtype=np.float64) >= threshold
        flagged = subset["conflict_score"].to_numpy(dtype=np.float64) > 0.0
        n_acc = int((~inaccurate).sum())
        n_inacc = int(inaccurate.sum())
        fp = int((~inaccurate & flagged).sum())
        fn = int((inaccurate & ~flagged).sum())
        scores = subset["conflict_score"].to_numpy(dtype=np.float64)[inaccurate & flagged]
        rows.append(
            {
                "indicator": key,
                "scope": scope,
                "n_accurate": n_acc,
                "n_inaccurate": n_inacc,
                "false_positives": fp,
                "false_negatives": fn,
                "fp_rate": fp / n_acc if n_acc else math.nan,
                "fn_rate": fn / n_inacc if n_inacc else math.nan,
                "mean_flagged_score": float(scores.mean()) if scores.size else math.nan,
            }
        )
    return pd.DataFrame(rows)


def _sample_errors(frame: pd.DataFrame) -> np.ndarray:
    unique = frame.drop_duplicates(["run_id", "sample_index"])
    return unique.sort_values(["run_id", "sample_index"])["error"].to_numpy(dtype=np.float64)


def _report_text(report: Report) -> str:
    lines = [
        f"Classification threshold: {report.configured_threshold:g}",
        "Discovered threshold: "
        + (
            "undefined"
            if report.discovered_threshold is None
            else f"{report.discovered_threshold:.6g}"
        ),
        "",
    ]
    for test in TESTS:
        lines.append(f"[{test}]")
        lines.append(f"{'kind':<20} {'scope':<7} {'mean':>10} {'var':>10} {'best':>10} {'N':>4}")
        rows = report.summary[report.summary["test"] == test]
        for row in rows.itertuples(index=False):
            lines.append(
                f"{row.kind:<20} {row.scope:<7} {row.mean:>10.4g} {row.variance:>10.4g} "
                f"{row.best:>10.4g} {row.n:>4d}"
            )
        lines.append("")
    lines.append("[false positives / negatives]")
    for row in report.classification.itertuples(index=False):
        lines.append(
            f"{row.indicator} {row.scope:<7} FP {row.false_positives}/{row.n_accurate} "
            f"FN {row.false_negatives}/{row.n_inaccurate}"
        )
    return "\n".join(lines) + "\n"


def report(
    results: pd.DataFrame, config: ExperimentConfig, output_dir: Optional[str | Path] = None
) -> Report:
    """
    Summarize a sweep per indicator kind: mean, variance and best of each test
    across the kind's configs, with N, for the sonar, laser and pooled scopes.

    Raises:
        ConfigError: the results table is empty
    """
    if results.empty:
        raise ConfigError("no sample records to report on")
    frame = results.copy()
    frame["kind"] = frame["kind"].astype(str)
    frame["sensor"] = frame["sensor"].astype(str)
    threshold = config.classification_threshold

    summary_rows = []
    for scope in SCOPES:
        subset = _scope_frame(frame, scope)
        if subset.empty:
            continue
        per_config = _per_config(subset, threshold)
        for kind in REPORT_ORDER:
            kind_rows = per_config[per_config["kind"] == kind.value]
            if kind_rows.empty:
                continue
            for test in TESTS:
                values = kind_rows[test].to_numpy(dtype=np.float64)
                stats = _summarize(values, test)
                if stats["n_undefined"]:
                    logger.warning(
                        "Undefined statistic",
                        test=test,
                        scope=scope,
                        kind=kind.value,
                        configs=stats["n_undefined"],
                    )
                summary_rows.append(
                    {"test": test, "scope": scope, "kind": kind.value, "n": len(kind_rows), **stats}
                )
    summary = pd.DataFrame(
        summary_rows,
        columns=[
            "test", "scope", "kind", "mean", "variance", "best", "best_abs", "n", "n_undefined"
        ],
    )

    try:
        discovered = discover_error_threshold(
            _sample_errors(frame), k=config.kmeans_clusters, seed=config.kmeans_seed
        )
    except UndefinedStatisticError as e:
        logger.warning("Error threshold discovery skipped", reason=e.reason)
        discovered = None

    result = Report(
        summary=summary,
        classification=_classification_rows(frame, config),
        configured_threshold=threshold,
        discovered_threshold=discovered,
        text="",
    )
    result.text = _report_text(result)

    if output_dir is not None:
        out = Path(output_dir)
        write_csv(result.summary, out / "summary.csv")
        write_csv(result.classification, out / "classification.csv")
        write_text(result.text, out / "report.txt")
    return result
