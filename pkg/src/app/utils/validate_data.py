"""Boundary checks for arrays and scalar parameters.

Each validator either returns the cleaned value or raises one of the errors from
``app.utils.errors`` after logging what was wrong.
"""

from collections.abc import Sequence
from typing import Any

import numpy as np
from numpy.typing import NDArray

from app.utils.errors import ConfigError, EmptySignalError, LengthMismatchError, SignalError
from app.utils.setup_logger import setup_logger

logger = setup_logger(__name__)


def as_float_array(values: Any, name: str = "signal", ndim: int = 1) -> NDArray[np.float64]:
    """Convert input to a finite float64 array of the expected rank.

    Args:
        values (Any): Array-like input.
        name (str): Label used in error messages.
        ndim (int): Required number of dimensions.

    Returns:
        NDArray[np.float64]: The converted array (a copy only when conversion requires one).

    Raises:
        EmptySignalError: If the array has no elements.
        SignalError: If the rank is wrong or any value is not finite.

    """
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != ndim:
        logger.error("❌ %s has %d dimension(s), expected %d", name, array.ndim, ndim)
        raise SignalError(f"{name} must be {ndim}-dimensional, got shape {array.shape}")
    if array.size == 0:
        raise EmptySignalError(f"{name} is empty")
    if not np.all(np.isfinite(array)):
        logger.error("❌ %s contains NaN or infinite values", name)
        raise SignalError(f"{name} contains non-finite values")
    return array


def validate_same_length(arrays: Sequence[NDArray[Any]], name: str = "signals") -> int:
    """Check that every array shares the same trailing length.

    Args:
        arrays (Sequence[NDArray[Any]]): Arrays to compare along their last axis.
        name (str): Label used in error messages.

    Returns:
        int: The common length.

    Raises:
        LengthMismatchError: If lengths differ.

    """
    lengths = {int(np.shape(a)[-1]) for a in arrays}
    if len(lengths) != 1:
        logger.error("❌ %s have mismatched lengths: %s", name, sorted(lengths))
        raise LengthMismatchError(f"{name} must share one length, got {sorted(lengths)}")
    return lengths.pop()


def validate_positive(value: float, name: str) -> float:
    """Check that a scalar is strictly positive and finite.

    Args:
        value (float): Value to check.
        name (str): Parameter name for the error message.

    Returns:
        float: The value as float.

    Raises:
        ConfigError: If the value is not positive.

    """
    number = float(value)
    if not np.isfinite(number) or number <= 0:
        raise ConfigError(f"{name} must be positive, got {value}")
    return number


def validate_fraction(value: float, name: str) -> float:
    """Check that a scalar lies in the half-open interval [0, 1).

    Args:
        value (float): Value to check.
        name (str): Parameter name for the error message.

    Returns:
        float: The value as float.

    Raises:
        ConfigError: If the value is outside [0, 1).

    """
    number = float(value)
    if not 0.0 <= number < 1.0:
        raise ConfigError(f"{name} must lie in [0, 1), got {value}")
    return number
