"""Shared enums and record shapes used across the application."""

from enum import Enum
from typing import Any, TypedDict


class PresetName(str, Enum):
    """Harmonic presets available to the simulator."""

    SINGLE = "single"
    TWO = "two"
    THREE = "three"
    FOUR = "four"
    SAWTOOTH = "sawtooth"
    SQUARE = "square"
    TRIANGLE = "triangle"


class NormalizeMode(str, Enum):
    """Normalization applied to a sampled signal."""

    ZERO_MEAN = "zero_mean"
    UNIT_NORM = "unit_norm"
    BOTH = "both"


class NoiseKind(str, Enum):
    """Additive channel noise distributions, all scaled to unit variance before use."""

    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    LAPLACE = "laplace"


class OrientationSource(str, Enum):
    """Where the disk orientation point comes from."""

    TRUTH = "truth"
    CHANNEL_MEAN = "channel_mean"
    PROXY = "proxy"


class BreathingPattern(str, Enum):
    """Controlled breathing patterns the video renderer can drive."""

    NORMAL = "normal"
    DEEP = "deep"
    FAST = "fast"
    NORMAL_DEEP_NORMAL = "normal_deep_normal"
    NORMAL_FAST_NORMAL = "normal_fast_normal"
    BREATH_HOLD = "breath_hold"


class ArtifactKind(str, Enum):
    """Artifacts a command can write to its output directory."""

    SIGNAL = "signal"
    CURVE = "curve"
    TABLE = "table"
    REPORT = "report"
    MEMBERSHIP = "membership"
    MATRIX = "matrix"
    MANIFEST = "manifest"
    METRICS = "metrics"


class CurveRow(TypedDict):
    """One row of a radius-of-exclusion sweep."""

    r_e: float
    goe: float
    n_members: int


class MatrixSidecar(TypedDict, total=False):
    """JSON sidecar describing a binary channel matrix."""

    n_channels: int
    n_samples: int
    sample_rate: float
    seed: int


class Manifest(TypedDict):
    """Run manifest written next to every command's artifacts."""

    command: str
    config: dict[str, Any]
    seed: int
    version: str
    wall_time_s: float
    started_at: str
    artifacts: list[str]
    extra: dict[str, Any]


def parse_enum(enum_cls: type[Enum], value: Any) -> Any:
    """Coerce a string or enum member into ``enum_cls``.

    Args:
        enum_cls (type[Enum]): Target enum.
        value (Any): Member or its value.

    Returns:
        Any: The enum member.

    Raises:
        ValueError: If the value does not name a member.

    """
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(str(value).strip().lower())
    except ValueError:
        allowed = ", ".join(str(m.value) for m in enum_cls)
        raise ValueError(f"Invalid {enum_cls.__name__} '{value}'. Expected one of: {allowed}")
