"""Shared configuration getters.

Provides typed, cached getter functions that read configuration from environment
variables (optionally populated from a ``.env`` file) with built-in defaults.
"""

from functools import lru_cache

from app.utils.config_utils import get_config_bool, get_config_int, get_config_value


@lru_cache
def get_log_level() -> str:
    """Retrieve the application log level.

    Returns:
        str: Logging level (e.g., 'INFO', 'DEBUG').

    Defaults to 'INFO' if not set.

    """
    return get_config_value("LOG_LEVEL", "INFO").upper()


@lru_cache
def get_log_format() -> str:
    """Return the configured log format.

    Returns:
        str: 'json' or 'text' (default is 'text').

    """
    return get_config_value("LOG_FORMAT", "text").lower()


@lru_cache
def get_structured_logging() -> bool:
    """Retrieve whether structured (JSON) logging is forced on.

    Returns:
        bool: True if STRUCTURED_LOGGING is enabled.

    """
    return get_config_bool("STRUCTURED_LOGGING", False)


@lru_cache
def get_log_file() -> str:
    """Retrieve the optional rotating log file path.

    Returns:
        str: Path, or an empty string when file logging is disabled.

    """
    return get_config_value("LOG_FILE", "")


@lru_cache
def get_output_dir() -> str:
    """Retrieve the default directory for command artifacts.

    Returns:
        str: Output directory path.

    Defaults to './output' if not set.

    """
    return get_config_value("OUTPUT_DIR", "output")


@lru_cache
def get_default_seed() -> int:
    """Retrieve the default random seed.

    Returns:
        int: Seed used when neither a config file nor a flag sets one.

    Raises:
        ConfigError: If DEFAULT_SEED is not a non-negative integer.

    """
    return get_config_int("DEFAULT_SEED", 0, minimum=0)


@lru_cache
def get_workers() -> int:
    """Retrieve the number of worker threads for parallel sweeps.

    Returns:
        int: Worker count, at least 1.

    Raises:
        ConfigError: If WORKERS is not a positive integer.

    """
    return get_config_int("WORKERS", 1, minimum=1)


@lru_cache
def get_metrics_enabled() -> bool:
    """Retrieve whether Prometheus metrics are written next to artifacts.

    Returns:
        bool: True if METRICS_ENABLED is set (default True).

    """
    return get_config_bool("METRICS_ENABLED", True)


def clear_config_cache() -> None:
    """Drop every memoized configuration value so the environment is re-read."""
    for getter in (
        get_log_level,
        get_log_format,
        get_structured_logging,
        get_log_file,
        get_output_dir,
        get_default_seed,
        get_workers,
        get_metrics_enabled,
    ):
        getter.cache_clear()
    get_config_value.cache_clear()
    get_config_bool.cache_clear()
