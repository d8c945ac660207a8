"""
Command-line entry point.
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import pandas as pd
import structlog
from pydantic import ValidationError

from conflictgrid.core.config import settings
from conflictgrid.core.exceptions import BaseApplicationError
from conflictgrid.core.logging import configure_logging, log_error
from conflictgrid.schemas.experiment import ExperimentConfig
from conflictgrid.schemas.sensor import SensorKind
from conflictgrid.services import export
from conflictgrid.services.gridmap import (
    EvidenceGrid,
    error_image,
    error_score,
    rasterize_truth,
    update_grid,
)
from conflictgrid.services.harness import report, sweep
from conflictgrid.services.indicators import configs_per_kind, enumerate_configs
from conflictgrid.services.simworld import count_anomalies, generate_run

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 2


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Experiment config from --config (JSON) with command-line overrides applied."""
    data: dict[str, Any] = {}
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    config = ExperimentConfig.model_validate(data)

    overrides: dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        overrides["seeds"] = [args.seed + i for i in range(len(config.seeds))]
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if getattr(args, "out_dir", None):
        overrides["output_dir"] = args.out_dir
    if getattr(args, "write_images", False):
        overrides["write_images"] = True
    if getattr(args, "write_logs", False):
        overrides["write_logs"] = True
    if not overrides:
        return config
    return ExperimentConfig.model_validate({**config.model_dump(mode="json"), **overrides})


def _emit(payload: Any) -> None:
    sys.stdout.write(json.dumps(payload, indent=2) + "\n")


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args)
    out = Path(config.output_dir) / "logs"
    hallways = [args.hallway] if args.hallway else [env.name for env in config.hallways]
    sensors = [SensorKind(args.sensor)] if args.sensor else config.sensors
    written = []
    for hallway in hallways:
        for sensor in sensors:
            for seed in config.seeds:
                run = generate_run(config.scenario(hallway, sensor), seed)
                path = export.write_run_log(run, out / f"{hallway}-{sensor.value}-{seed}.jsonl")
                logger.info(
                    "Run log written",
                    path=str(path),
                    scans=len(run.records),
                    anomalies=sum(count_anomalies(run).values()),
                )
                written.append(str(path))
    _emit({"run_logs": written})
    return EXIT_OK


def cmd_map(args: argparse.Namespace) -> int:
    config = load_config(args)
    run = export.read_run_log(args.log)
    scenario = run.header.scenario
    grid = EvidenceGrid(
        spec=config.grid, sensor=scenario.sensor, magnitudes=tuple(config.magnitudes)
    )
    for record in run.records:
        update_grid(grid, record.readings, scenario.sensor)

    out = Path(config.output_dir)
    truth = rasterize_truth(scenario.environment, config.grid)
    export.save_grid(grid, out / "grid.npz")
    export.write_grid_images(grid, out)
    export.write_pgm(
        out / "truth.pgm",
        export.truth_image(truth),
        comment="0 empty, 128 excluded, 255 occupied",
    )
    export.write_cell_stats(grid, out / "cell_stats.csv")
    _emit(
        {
            "grid": str(out / "grid.npz"),
            "scanned_cells": int(grid.scanned.sum()),
            "total_con": grid.con_generated,
            "saturations": grid.saturations,
        }
    )
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    config = load_config(args)
    grid = export.load_grid(args.grid)
    if args.log:
        env = export.read_run_log(args.log).header.scenario.environment
    else:
        env = config.hallway(args.hallway)
    truth = rasterize_truth(env, grid.spec)
    score = error_score(grid, truth)
    image = error_image(grid, truth)
    out = Path(config.output_dir)
    export.write_pgm(out / "error_image.pgm", image, comment=f"error image, score {score:.6g}")
    _emit(
        {
            "hallway": env.name,
            "error": score,
            "inaccurate": score >= config.classification_threshold,
            "highlighted_cells": int(image.sum()),
        }
    )
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = load_config(args)
    frame = sweep(config)
    result = report(frame, config, output_dir=config.output_dir)
    sys.stdout.write(result.text)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    config = load_config(args)
    frame = pd.read_csv(args.results)
    out = Path(args.out_dir) if args.out_dir else Path(args.results).parent
    result = report(frame, config, output_dir=out)
    sys.stdout.write(result.text)
    return EXIT_OK


def cmd_configs(args: argparse.Namespace) -> int:
    if args.schema:
        _emit(ExperimentConfig.model_json_schema())
        return EXIT_OK
    configs = enumerate_configs()
    if args.list:
        sys.stdout.write("".join(f"{c.key}\n" for c in configs))
    else:
        counts = {kind.value: n for kind, n in configs_per_kind(configs).items()}
        _emit({"total": len(configs), "per_kind": counts})
    return EXIT_OK


def create_parser() -> argparse.ArgumentParser:
    """
    Build the argument parser.

    Returns:
        argparse.ArgumentParser: Parser with one subcommand per operation
    """
    parser = argparse.ArgumentParser(prog="conflictgrid", description=settings.PROJECT_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    parser.add_argument("--log-level", default=None, help=f"default {settings.LOG_LEVEL}")
    parser.add_argument("--log-format", choices=["json", "console"], default=None)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="base seed; runs use seed, seed+1, ...")
    common.add_argument("--workers", type=int, help=f"default {settings.SWEEP_WORKERS}")
    common.add_argument("--out-dir", dest="out_dir", help=f"default {settings.OUTPUT_DIR}")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate run logs")
    p.add_argument("--hallway", help="only this hallway")
    p.add_argument("--sensor", choices=[k.value for k in SensorKind], help="only this sensor")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("map", parents=[common], help="replay a run log into a grid")
    p.add_argument("log", help="run log (JSON lines)")
    p.set_defaults(handler=cmd_map)

    p = sub.add_parser("score", parents=[common], help="score a grid against ground truth")
    p.add_argument("grid", help="grid snapshot (.npz)")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--log", help="run log whose hallway is the truth")
    source.add_argument("--hallway", help="configured hallway name")
    p.set_defaults(handler=cmd_score)

    p = sub.add_parser("sweep", parents=[common], help="run the full protocol and report")
    p.add_argument("--write-images", action="store_true", help="write error images and maps")
    p.add_argument("--write-logs", action="store_true", help="write run logs")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("report", parents=[common], help="summarize a sweep CSV")
    p.add_argument("results", help="sweep.csv")
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("configs", help="list indicator configurations")
    p.add_argument("--schema", action="store_true", help="print the experiment config schema")
    p.add_argument("--list", action="store_true", help="print every config key")
    p.set_defaults(handler=cmd_configs)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = create_parser()
    args = parser.parse_args(argv)
    configure_logging(level=args.log_level, fmt=args.log_format)
    try:
        return int(args.handler(args))
    except (BaseApplicationError, ValidationError, KeyError, OSError, ValueError) as e:
        log_error(logger, args.command, e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
