"""
Configure structured logging.
"""
import logging
import sys
from typing import Any

import structlog

from conflictgrid.core.config import settings


def configure_logging(level: str | None = None, fmt: str | None = None) -> None:
    """
    Configure structlog on top of the standard library logger.

    Output goes to stderr so that stdout stays free for command output.

    Args:
        level: Log level name; defaults to settings.LOG_LEVEL
        fmt: "json" or "console"; defaults to settings.LOG_FORMAT
    """
    level_name = (level or settings.LOG_LEVEL).upper()
    renderer: Any
    if (fmt or settings.LOG_FORMAT).lower() == "console":
        renderer = structlog.dev.ConsoleRenderer()
    else:
        renderer = structlog.processors.JSONRenderer()

    structlog.configure(
        processors=[
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            renderer,
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, level_name))

    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(logging.Formatter(fmt="%(message)s"))
    root_logger.addHandler(console_handler)

    logger = structlog.get_logger(__name__)
    logger.debug(
        "Logging configured",
        log_level=level_name,
        environment=settings.ENVIRONMENT,
        version=settings.VERSION,
    )


def log_error(
    logger: structlog.stdlib.BoundLogger,
    operation: str,
    error: Exception,
    **kwargs: Any,
) -> None:
    """
    Log a failed operation with structured data.

    Args:
        logger: The logger instance
        operation: What was being attempted (e.g. the CLI subcommand)
        error: The exception that occurred
        **kwargs: Additional fields to log
    """
    logger.error(
        "Operation failed",
        operation=operation,
        error=str(error),
        error_type=error.__class__.__name__,
        **kwargs,
    )
