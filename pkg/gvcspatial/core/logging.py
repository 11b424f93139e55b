"""
Structured logging for gvc-spatial.

Records go to stderr (and optionally a file) so that report text on stdout
stays clean. A command binds its name and seed once with
``command_context``; every record emitted while it runs carries them, and
``timed`` adds the pipeline stage and its duration.
"""

import logging
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

import structlog
from rich.console import Console
from rich.logging import RichHandler

from .config import get_settings


def setup_logging(level: Optional[str] = None) -> None:
    """Configure structlog over the standard library root logger."""
    settings = get_settings()
    level_name = (level or settings.log_level).upper()

    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, level_name),
        force=True,
    )

    renderer = structlog.dev.ConsoleRenderer() if settings.debug else structlog.processors.JSONRenderer(sort_keys=True)
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            structlog.processors.TimeStamper(fmt="ISO"),
            structlog.processors.CallsiteParameterAdder(
                parameters=[structlog.processors.CallsiteParameter.FILENAME, structlog.processors.CallsiteParameter.LINENO]
            ),
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.stdlib.BoundLogger,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    root_logger = logging.getLogger()
    if settings.debug and settings.verbose_logging:
        root_logger.handlers.clear()
        root_logger.addHandler(
            RichHandler(console=Console(stderr=True), show_time=False, show_path=False, rich_tracebacks=True)
        )
    if settings.log_file:
        log_path = Path(settings.log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        root_logger.addHandler(logging.FileHandler(log_path, encoding="utf-8"))


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """Logger named after the toolkit module that emits through it."""
    return structlog.get_logger(name)


@contextmanager
def command_context(command: str, **fields: Any) -> Iterator[None]:
    """Bind the command name (and e.g. its seed) to every record inside the block."""
    bound = {key: value for key, value in fields.items() if value is not None}
    with structlog.contextvars.bound_contextvars(command=command, **bound):
        yield


@contextmanager
def timed(stage: str, **fields: Any) -> Iterator[Dict[str, Any]]:
    """Log the duration of one pipeline stage.

    The yielded dict is logged with the duration, so a stage can add counts
    it only knows at the end.
    """
    extra: Dict[str, Any] = dict(fields)
    start = time.perf_counter()
    with structlog.contextvars.bound_contextvars(stage=stage):
        yield extra
        log_performance(stage, time.perf_counter() - start, **extra)


def log_error(error: Exception, exit_code: int, context: Optional[Dict[str, Any]] = None) -> None:
    """Log a failure that ends the command, with the exit status it maps to."""
    get_logger("errors").error(
        "Command failed",
        error=str(error),
        error_type=type(error).__name__,
        exit_code=exit_code,
        **(context or {}),
    )


def log_performance(operation: str, duration: float, **kwargs: Any) -> None:
    """Log the wall time of an operation."""
    get_logger("performance").info(f"Performance: {operation}", duration_seconds=round(duration, 6), **kwargs)
