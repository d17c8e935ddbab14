"""Track and log pipeline stages.

Wraps a block of pipeline work, logs its outcome and duration, and emits the stage
Prometheus metrics.
"""

import time
from collections.abc import Iterator
from contextlib import contextmanager

from app.utils.metrics import record_stage_metrics
from app.utils.setup_logger import setup_logger

logger = setup_logger(__name__)


@contextmanager
def track_stage(stage: str) -> Iterator[None]:
    """Time a pipeline stage and record success or failure.

    Args:
        stage (str): Stage label (e.g., "disk", "sweep", "prune").

    Raises:
        ValueError: If the stage label is empty.

    """
    if not stage:
        raise ValueError("Stage label must be a non-empty string.")
    start = time.perf_counter()
    try:
        yield
    except Exception:
        duration = time.perf_counter() - start
        record_stage_metrics(stage, success=False, duration_sec=duration)
        logger.error("❌ Stage '%s' failed after %.3f s", stage, duration)
        raise
    duration = time.perf_counter() - start
    record_stage_metrics(stage, success=True, duration_sec=duration)
    logger.debug("📊 Stage '%s' finished in %.3f s", stage, duration)
