"""
Worker-side job for sweeps: simulate one run and score it end to end.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import structlog

from conflictgrid.schemas.experiment import ExperimentConfig
from conflictgrid.schemas.sensor import SensorKind
from conflictgrid.services.export import write_run_log
from conflictgrid.services.harness import run_experiment
from conflictgrid.services.simworld import generate_run

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class RunJob:
    config: ExperimentConfig
    hallway: str
    sensor: SensorKind
    seed: int

    @property
    def run_id(self) -> str:
        return f"{self.hallway}-{self.sensor.value}-{self.seed}"


def process_run(job: RunJob) -> list[dict[str, Any]]:
    """
    Process one experiment run.

    1. Simulate the run for the job's hallway, sensor and seed
    2. Optionally write its log as JSON lines
    3. Replay it into a fresh grid and score every selected indicator config

    Args:
        job: Hallway, sensor and seed of the run, with the experiment config

    Returns:
        Sample records as plain dicts, ready for a DataFrame
    """
    log = logger.bind(run_id=job.run_id)
    log.info("Starting run")
    try:
        scenario = job.config.scenario(job.hallway, job.sensor)
        run = generate_run(scenario, job.seed)
        output_dir = Path(job.config.output_dir)
        if job.config.write_logs:
            write_run_log(run, output_dir / "logs" / f"{job.run_id}.jsonl")
        records = run_experiment(job.config, run, run_id=job.run_id, output_dir=output_dir)
    except Exception as e:
        log.error("Run failed", error=str(e), error_type=e.__class__.__name__)
        raise
    return [record.model_dump(mode="json") for record in records]
