"""Shared Prometheus metric definitions for the estimation pipeline.

Exports counters, histograms and gauges for:
- Command runs and failures
- Pipeline stage durations
- Membership size and selected GoE
- Written artifacts
"""

import re
from pathlib import Path

from prometheus_client import REGISTRY, Counter, Gauge, Histogram, generate_latest, write_to_textfile


def get_prometheus_metrics() -> str:
    """Return all registered Prometheus metrics as a text payload."""
    return generate_latest(REGISTRY).decode("utf-8")


def write_prometheus_metrics(path: str | Path) -> Path:
    """Write the registry's text exposition to ``path`` and return it."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    write_to_textfile(str(target), REGISTRY)
    return target


def _sanitize_label(value: str) -> str:
    """Sanitize a string to be Prometheus-compatible label.

    Args:
        value (str): The input string to sanitize.

    Returns:
        str: Sanitized label safe for Prometheus use.

    """
    return re.sub(r"[^\w\-:.]", "_", value)[:64]


# -----------------------------
# Command Metrics
# -----------------------------
command_runs = Counter(
    "deconv_command_runs_total",
    "Total number of CLI command runs by command and outcome.",
    ["command", "status"],
)

command_duration = Histogram(
    "deconv_command_duration_seconds",
    "Wall time of CLI commands.",
    ["command"],
    buckets=[0.1, 0.5, 1, 5, 15, 60, 300],
)


def record_command_metrics(command: str, success: bool, duration_sec: float) -> None:
    """Record one command run."""
    command = _sanitize_label(command)
    command_runs.labels(command=command, status="success" if success else "failure").inc()
    command_duration.labels(command=command).observe(duration_sec)


# -----------------------------
# Stage Metrics
# -----------------------------
stage_counter = Counter(
    "deconv_stage_total",
    "Pipeline stage executions by stage and outcome.",
    ["stage", "status"],
)

stage_duration = Histogram(
    "deconv_stage_duration_seconds",
    "Duration of pipeline stages.",
    ["stage"],
    buckets=[0.001, 0.01, 0.1, 0.5, 1, 5, 30],
)


def record_stage_metrics(stage: str, success: bool, duration_sec: float) -> None:
    """Record one pipeline stage execution."""
    stage = _sanitize_label(stage)
    stage_counter.labels(stage=stage, status="success" if success else "failure").inc()
    stage_duration.labels(stage=stage).observe(duration_sec)


# -----------------------------
# Membership Metrics
# -----------------------------
membership_size = Histogram(
    "deconv_membership_size",
    "Number of channels in the selected membership set.",
    buckets=[1, 10, 100, 1000, 5000, 20000, 100000],
)

selected_goe = Gauge(
    "deconv_selected_goe",
    "GoE of the most recently selected estimate.",
)


def record_membership_metrics(n_members: int, goe: float) -> None:
    """Record the size and score of a selected membership."""
    membership_size.observe(n_members)
    selected_goe.set(goe)


# -----------------------------
# Artifact Metrics
# -----------------------------
artifact_counter = Counter(
    "deconv_artifacts_written_total",
    "Artifacts written by kind.",
    ["kind"],
)


def record_artifact_metrics(kind: str) -> None:
    """Count one written artifact."""
    artifact_counter.labels(kind=_sanitize_label(kind)).inc()
