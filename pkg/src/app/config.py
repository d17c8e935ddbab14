"""Run configuration for resp-deconv commands.

A ``RunConfig`` is assembled from built-in defaults, the environment (``app.config_shared``),
an optional flat JSON file and finally command-line flags, each layer overriding the last.
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from app import config_shared
from app.disk_membership import DEFAULT_GOE_EPSILON, DEFAULT_RADIUS_GRID
from app.proxy_freq import RESPIRATORY_BAND_HZ
from app.quad_basis import DEFAULT_BASIS_SAMPLES, MIN_BASIS_SAMPLES
from app.utils.errors import ConfigError
from app.utils.setup_logger import setup_logger
from app.utils.types import NoiseKind, OrientationSource, parse_enum

logger = setup_logger(__name__)


@dataclass(frozen=True)
class RunConfig:
    """Parameters shared by every command."""

    seed: int = field(default_factory=config_shared.get_default_seed)
    sample_rate: float = 100.0
    n_channels: int = 5000
    m_basis_samples: int = DEFAULT_BASIS_SAMPLES
    r_e_grid: tuple[float, ...] = DEFAULT_RADIUS_GRID
    goe_epsilon: float = DEFAULT_GOE_EPSILON
    band: tuple[float, float] | None = None
    segment_len: float | None = None
    output_dir: str = field(default_factory=config_shared.get_output_dir)
    snr_db: float = 0.0
    periods: float = 10.0
    orientation: str = OrientationSource.TRUTH.value
    noise_kind: str = NoiseKind.GAUSSIAN.value
    workers: int = field(default_factory=config_shared.get_workers)
    percentile: float = 80.0
    min_rr_hz: float = 0.1
    rr_window_s: float = 15.0
    ci_halfwidth: float = 3.0

    def __post_init__(self) -> None:
        """Coerce list-valued fields and validate ranges."""
        object.__setattr__(self, "r_e_grid", tuple(float(r) for r in self.r_e_grid))
        if self.band is not None:
            band = tuple(float(b) for b in self.band)
            if len(band) != 2:
                raise ConfigError(f"band needs two edges, got {self.band}")
            object.__setattr__(self, "band", band)
        self._validate()

    def _validate(self) -> None:
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        for name in ("sample_rate", "periods", "min_rr_hz", "rr_window_s", "ci_halfwidth"):
            if not float(getattr(self, name)) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_channels < 1:
            raise ConfigError(f"n_channels must be at least 1, got {self.n_channels}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.m_basis_samples < MIN_BASIS_SAMPLES:
            raise ConfigError(
                f"m_basis_samples must be at least {MIN_BASIS_SAMPLES}, got {self.m_basis_samples}"
            )
        if not self.r_e_grid or any(not 0.0 <= r < 1.0 for r in self.r_e_grid):
            raise ConfigError(f"r_e_grid must be non-empty with values in [0, 1), got {self.r_e_grid}")
        if not 0.0 < self.goe_epsilon < 1.0:
            raise ConfigError(f"goe_epsilon must lie in (0, 1), got {self.goe_epsilon}")
        if self.band is not None and not 0.0 < self.band[0] < self.band[1]:
            raise ConfigError(f"band must satisfy 0 < low < high, got {self.band}")
        if self.segment_len is not None and not self.segment_len > 0:
            raise ConfigError(f"segment_len must be positive, got {self.segment_len}")
        if not 0.0 <= self.percentile <= 100.0:
            raise ConfigError(f"percentile must lie in [0, 100], got {self.percentile}")
        for enum_cls, value in ((OrientationSource, self.orientation), (NoiseKind, self.noise_kind)):
            try:
                parse_enum(enum_cls, value)
            except ValueError as e:
                raise ConfigError(str(e)) from e

    @property
    def video_band(self) -> tuple[float, float]:
        """Search band for video commands; the respiratory band unless set."""
        return self.band if self.band is not None else RESPIRATORY_BAND_HZ

    @property
    def orientation_source(self) -> OrientationSource:
        """Orientation as an enum member."""
        return parse_enum(OrientationSource, self.orientation)  # type: ignore[no-any-return]

    @property
    def noise(self) -> NoiseKind:
        """Noise distribution as an enum member."""
        return parse_enum(NoiseKind, self.noise_kind)  # type: ignore[no-any-return]

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready form with lists in place of tuples."""
        data = asdict(self)
        data["r_e_grid"] = list(self.r_e_grid)
        data["band"] = list(self.band) if self.band is not None else None
        return data


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def _read_config_file(path: str | Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a flat JSON object")
    unknown = sorted(set(data) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {', '.join(unknown)}")
    return data


def load_run_config(
    path: str | Path | None = None, overrides: dict[str, Any] | None = None
) -> RunConfig:
    """Build a RunConfig from defaults, environment, an optional JSON file and overrides.

    Args:
        path (str | Path | None): Flat JSON object whose keys mirror RunConfig fields.
        overrides (dict[str, Any] | None): Values from command-line flags; None entries are
            ignored.

    Returns:
        RunConfig: Validated configuration.

    Raises:
        ConfigError: On unknown keys, malformed JSON or out-of-range values.

    """
    values: dict[str, Any] = {}
    if path is not None:
        values.update(_read_config_file(path))
        logger.debug("⚙️ Loaded run config from %s", path)
    for key, value in (overrides or {}).items():
        if key not in _FIELD_NAMES:
            raise ConfigError(f"unknown config override '{key}'")
        if value is not None:
            values[key] = value
    try:
        return replace(RunConfig(), **values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid config value: {e}") from e
