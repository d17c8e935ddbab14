"""Module to write command artifacts to the output directory.

Supports signal, curve and table CSVs, JSON reports and membership sets, binary channel
matrices, run manifests and the Prometheus text exposition. Every written file is recorded
so the manifest can list it.
"""

import json
import time
from collections.abc import Callable
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from app import __version__, config_shared
from app.channel_sim import save_matrix
from app.disk_membership import MembershipSet
from app.periodic_signal import SampledSignal, to_frame
from app.utils.metrics import record_artifact_metrics, write_prometheus_metrics
from app.utils.setup_logger import setup_logger
from app.utils.types import ArtifactKind, Manifest, parse_enum

logger = setup_logger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dump_json(data: Any) -> str:
    """Serialize with sorted keys, two-space indent and a trailing newline."""
    return json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_csv(frame: pd.DataFrame, path: Path) -> None:
    """Write a DataFrame with round-trip float precision and '\\n' line endings."""
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


class OutputWriter:
    """Routes artifacts of one command run to files under ``output_dir``."""

    def __init__(self, output_dir: str | Path | None = None) -> None:
        """Initialize the writer and create the output directory."""
        self.output_dir = Path(output_dir or config_shared.get_output_dir())
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[str] = []
        self._started = time.perf_counter()
        self.started_at = datetime.now(timezone.utc).isoformat()

    def write(self, kind: ArtifactKind | str, name: str, payload: Any, **options: Any) -> Path:
        """Write one artifact.

        Args:
            kind (ArtifactKind | str): Artifact type selecting the writer.
            name (str): File name relative to the output directory.
            payload (Any): Object to write; its type depends on ``kind``.
            **options (Any): Writer-specific options (``value_name`` for signals,
                ``sample_rate`` and ``seed`` for matrices).

        Returns:
            Path: Path of the written file.

        """
        kind = parse_enum(ArtifactKind, kind)
        target = self.output_dir / name
        target.parent.mkdir(parents=True, exist_ok=True)
        self._get_writer(kind)(target, payload, **options)
        self.artifacts.append(name)
        record_artifact_metrics(kind.value)
        logger.debug("💾 Wrote %s artifact %s", kind.value, target)
        return target

    def _get_writer(self, kind: ArtifactKind) -> Callable[..., None]:
        """Resolve the writer for an artifact kind."""
        return {
            ArtifactKind.SIGNAL: self._write_signal,
            ArtifactKind.CURVE: self._write_table,
            ArtifactKind.TABLE: self._write_table,
            ArtifactKind.REPORT: self._write_json,
            ArtifactKind.MEMBERSHIP: self._write_membership,
            ArtifactKind.MATRIX: self._write_matrix,
            ArtifactKind.MANIFEST: self._write_json,
            ArtifactKind.METRICS: self._write_metrics,
        }[kind]

    def _write_signal(self, path: Path, payload: SampledSignal, value_name: str = "value") -> None:
        write_csv(to_frame(payload, value_name), path)

    def _write_table(self, path: Path, payload: pd.DataFrame | list[dict[str, Any]]) -> None:
        frame = payload if isinstance(payload, pd.DataFrame) else pd.DataFrame(payload)
        write_csv(frame, path)

    def _write_json(self, path: Path, payload: Any) -> None:
        path.write_text(dump_json(payload))

    def _write_membership(self, path: Path, payload: MembershipSet) -> None:
        path.write_text(dump_json(payload.to_dict()))

    def _write_matrix(
        self, path: Path, payload: np.ndarray, sample_rate: float = 1.0, seed: int = -1
    ) -> None:
        save_matrix(path, payload, sample_rate, seed)

    def _write_metrics(self, path: Path, payload: Any = None) -> None:
        write_prometheus_metrics(path)

    def write_manifest(
        self,
        command: str,
        config: dict[str, Any],
        seed: int,
        extra: dict[str, Any] | None = None,
        name: str = "manifest.json",
    ) -> Path:
        """Write the run manifest listing every artifact written so far.

        Args:
            command (str): Command name.
            config (dict[str, Any]): Effective configuration.
            seed (int): Root seed of the run.
            extra (dict[str, Any] | None): Command-specific details.
            name (str): Manifest file name.

        Returns:
            Path: Path of the manifest.

        """
        manifest: Manifest = {
            "command": command,
            "config": config,
            "seed": int(seed),
            "version": __version__,
            "wall_time_s": round(time.perf_counter() - self._started, 6),
            "started_at": self.started_at,
            "artifacts": list(self.artifacts),
            "extra": extra or {},
        }
        path = self.write(ArtifactKind.MANIFEST, name, manifest)
        logger.info("✅ %s wrote %d artifact(s) to %s", command, len(self.artifacts), self.output_dir)
        return path

    def write_metrics(self, name: str = "metrics.prom") -> Path | None:
        """Write the Prometheus exposition when metrics are enabled."""
        if not config_shared.get_metrics_enabled():
            return None
        return self.write(ArtifactKind.METRICS, name, None)


__all__ = ["OutputWriter", "dump_json", "write_csv"]
