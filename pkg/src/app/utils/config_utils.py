"""Environment lookups behind the configuration getters.

Values are memoized with functools.lru_cache; call
``app.config_shared.clear_config_cache`` after changing the environment.
"""

import os
from functools import lru_cache

from app.utils.errors import ConfigError


@lru_cache
def get_config_value(key: str, default: str = "") -> str:
    """Retrieve a configuration value from the environment.

    Args:
        key (str): The name of the environment variable.
        default (str): The fallback value if the environment variable is not set or blank.

    Returns:
        str: The stripped value of the environment variable or the default.

    """
    value = os.getenv(key)
    if value is None or not value.strip():
        return default
    return value.strip()


@lru_cache
def get_config_bool(key: str, default: bool = False) -> bool:
    """Retrieve a boolean configuration value from the environment.

    Accepts 1/true/yes/on (case-insensitive) as true; anything else set is false.
    """
    val = os.getenv(key)
    if val is None:
        return default
    return val.strip().lower() in ("1", "true", "yes", "on")


def get_config_int(key: str, default: int, minimum: int | None = None) -> int:
    """Retrieve an integer configuration value with an optional lower bound.

    Args:
        key (str): The name of the environment variable.
        default (int): The fallback value if the variable is not set or blank.
        minimum (int | None): Smallest accepted value.

    Returns:
        int: The parsed value.

    Raises:
        ConfigError: If the value is not an integer or falls below ``minimum``.

    """
    raw_value = get_config_value(key, str(default))
    try:
        number = int(raw_value)
    except ValueError:
        raise ConfigError(f"Invalid {key}: '{raw_value}'. Must be an integer.")
    if minimum is not None and number < minimum:
        raise ConfigError(f"Invalid {key}: '{raw_value}'. Must be at least {minimum}.")
    return number
