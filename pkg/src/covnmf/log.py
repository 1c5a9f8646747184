"""Structured logging setup."""

import logging
import sys
from typing import Any

import structlog

from .config import LogFormat, LogLevel


def _stderr_logger(*args: Any) -> structlog.PrintLogger:
    # resolved per event so a replaced sys.stderr is honoured
    return structlog.PrintLogger(sys.stderr)


def configure_logging(
    level: LogLevel | str = LogLevel.WARNING,
    fmt: LogFormat | str = LogFormat.CONSOLE,
) -> None:
    """Route structlog events to stderr with the requested level and renderer."""
    level_name = LogLevel(str(getattr(level, "value", level)).upper()).value
    renderer: structlog.types.Processor
    if LogFormat(getattr(fmt, "value", fmt)) is LogFormat.JSON:
        renderer = structlog.processors.JSONRenderer(sort_keys=True)
    else:
        renderer = structlog.dev.ConsoleRenderer(colors=False)

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(level_name)
        ),
        logger_factory=_stderr_logger,
        cache_logger_on_first_use=False,
    )


def configure_default_logging() -> None:
    """Warnings and errors to stderr, unless the host application configured structlog."""
    if not structlog.is_configured():
        configure_logging()
