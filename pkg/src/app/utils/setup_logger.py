"""Configures loggers with console, optional file and optional JSON output.

Every record is stamped with the command and seed of the current run (see
``bind_run_context``) so log lines from sweeps and reruns can be told apart.
"""

import logging
import sys
from logging import Logger
from logging.handlers import RotatingFileHandler
from typing import Any

try:
    from pythonjsonlogger.json import JsonFormatter
except ImportError:
    JsonFormatter = None  # JSON logging fallback

from app import config_shared

TEXT_FORMAT = "%(asctime)s [%(levelname)s] %(name)s (%(command)s) - %(message)s"
JSON_FORMAT = "%(asctime)s %(levelname)s %(name)s %(command)s %(seed)s %(message)s"

_run_context: dict[str, Any] = {"command": "-", "seed": None}


class RunContextFilter(logging.Filter):
    """Adds ``command`` and ``seed`` attributes to records that lack them."""

    def filter(self, record: logging.LogRecord) -> bool:
        """Stamp the record; never drops it."""
        for key, value in _run_context.items():
            if not hasattr(record, key):
                setattr(record, key, value)
        return True


def bind_run_context(command: str, seed: int | None = None) -> None:
    """Set the command and seed attached to every subsequent log record."""
    _run_context["command"] = command
    _run_context["seed"] = seed


def get_run_context() -> dict[str, Any]:
    """Copy of the context currently stamped on records."""
    return dict(_run_context)


def _build_formatter(structured: bool) -> logging.Formatter:
    if structured and JsonFormatter:
        return JsonFormatter(JSON_FORMAT)
    return logging.Formatter(fmt=TEXT_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")


def setup_logger(
    name: str | None = None,
    level: int | None = None,
    structured: bool | None = None,
    log_file: str | None = None,
) -> Logger:
    """Configure and return a logger with optional structured and file output.

    Args:
        name (Optional[str]): Logger name.
        level (Optional[int]): Logging level (overrides LOG_LEVEL config).
        structured (Optional[bool]): Use structured (JSON) logging (overrides LOG_FORMAT and
            STRUCTURED_LOGGING config).
        log_file (Optional[str]): Path to a log file (overrides LOG_FILE; enables rotation).

    Returns:
        Logger: Configured logger instance.

    """
    logger = logging.getLogger(name or "app")

    if logger.hasHandlers():
        return logger

    level_name = config_shared.get_log_level()
    resolved_level: int = level if level is not None else getattr(logging, level_name, logging.INFO)

    if structured is None:
        structured = (
            config_shared.get_structured_logging() or config_shared.get_log_format() == "json"
        )
    formatter = _build_formatter(structured)
    context_filter = RunContextFilter()

    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stdout)]
    log_file = log_file if log_file is not None else config_shared.get_log_file()
    if log_file:
        handlers.append(RotatingFileHandler(log_file, maxBytes=5 * 1024 * 1024, backupCount=3))
    for handler in handlers:
        handler.setFormatter(formatter)
        handler.addFilter(context_filter)
        logger.addHandler(handler)

    logger.setLevel(resolved_level)
    logger.propagate = False

    if structured and not JsonFormatter:
        logger.warning("⚠️ Structured logging requested but 'python-json-logger' is not installed.")

    return logger
