"""Initialize the `utils` package for shared application utilities.

Included Utilities:
- setup_logger: Configures logging with optional structured output and run context.
- track_stage_metrics: Times a pipeline stage and records its Prometheus metrics.
- validate_data: Boundary checks for arrays and scalar parameters.
- errors: Exception hierarchy mapped onto CLI exit codes.

Submodules are imported explicitly; nothing here configures a logger at import time
because ``app.config_shared`` may still be initializing.
"""

from .setup_logger import bind_run_context, setup_logger

__all__ = ["bind_run_context", "setup_logger"]
