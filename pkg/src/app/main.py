"""Main entry point for the resp-deconv command line.

Loads ``.env``, builds the run configuration, dispatches to a command in
``app.experiments`` and writes the run manifest and metrics next to its artifacts.
Exit codes: 0 ok, 1 unexpected failure, 2 configuration error, 3 pipeline or I/O error.
"""

import argparse
import json
import sys
import time
from collections.abc import Callable, Sequence
from typing import Any

from dotenv import load_dotenv

from app import __version__
from app.config import RunConfig, load_run_config
from app.experiments import (
    BASISFREQ_RATIOS,
    CommandOutcome,
    cmd_estimate,
    cmd_goe_curve,
    cmd_render,
    cmd_simulate,
    cmd_sweep_basisfreq,
    cmd_sweep_snr,
    cmd_video,
)
from app.output_handler import OutputWriter
from app.utils.errors import ConfigError, SignalError
from app.utils.metrics import record_command_metrics
from app.utils.setup_logger import bind_run_context, setup_logger
from app.utils.types import BreathingPattern, NoiseKind, OrientationSource, PresetName

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

DEFAULT_SNR_LIST = (-15.0, -10.0, -5.0, -2.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0)

# flags that map one-to-one onto RunConfig fields
CONFIG_FLAGS = (
    "seed",
    "sample_rate",
    "n_channels",
    "m_basis_samples",
    "r_e_grid",
    "goe_epsilon",
    "band",
    "segment_len",
    "output_dir",
    "snr_db",
    "periods",
    "orientation",
    "noise_kind",
    "workers",
    "percentile",
    "min_rr_hz",
    "rr_window_s",
    "ci_halfwidth",
)


def _config_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("run configuration")
    group.add_argument("--config", help="Flat JSON file with RunConfig keys.")
    group.add_argument("--seed", type=int)
    group.add_argument("--sample-rate", type=float)
    group.add_argument("--n-channels", type=int)
    group.add_argument("--m-basis-samples", type=int)
    group.add_argument("--r-e-grid", type=float, nargs="+", metavar="R_E")
    group.add_argument("--goe-epsilon", type=float)
    group.add_argument(
        "--band",
        type=float,
        nargs=2,
        metavar=("LOW_HZ", "HIGH_HZ"),
        help="Proxy search band; defaults to 0.1-0.583 Hz for videos, up to Nyquist for matrices.",
    )
    group.add_argument("--segment-len", type=float, help="Segment length in seconds.")
    group.add_argument("--output-dir")
    group.add_argument("--snr-db", type=float)
    group.add_argument("--periods", type=float, help="Simulated length in fundamental periods.")
    group.add_argument("--orientation", choices=[o.value for o in OrientationSource])
    group.add_argument("--noise-kind", choices=[k.value for k in NoiseKind])
    group.add_argument("--workers", type=int)
    group.add_argument("--percentile", type=float, help="Pixel pruning percentile.")
    group.add_argument("--min-rr-hz", type=float)
    group.add_argument("--rr-window-s", type=float)
    group.add_argument("--ci-halfwidth", type=float)
    return parent


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subcommand per experiment."""
    parent = _config_parent()
    presets = [p.value for p in PresetName]
    parser = argparse.ArgumentParser(
        prog="resp-deconv", description="Blind SIMO deconvolution of periodic signals."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep-snr", parents=[parent], help="NCC versus SNR per preset.")
    p.add_argument("--presets", nargs="*", default=presets)
    p.add_argument("--snr-list", type=float, nargs="+", default=list(DEFAULT_SNR_LIST))
    p.add_argument("--n-seeds", type=int, default=1)

    p = sub.add_parser("sweep-basisfreq", parents=[parent], help="NCC versus basis frequency.")
    p.add_argument("--preset", default=PresetName.SAWTOOTH.value)
    p.add_argument("--ratios", type=float, nargs="+", default=list(BASISFREQ_RATIOS))
    p.add_argument("--two-step", action="store_true")
    p.add_argument("--n-seeds", type=int, default=1)

    p = sub.add_parser("goe-curve", parents=[parent], help="GoE and NCC versus r_e.")
    p.add_argument("--preset", default=PresetName.SAWTOOTH.value)

    p = sub.add_parser("video", parents=[parent], help="Estimate RP and RR from frames.")
    p.add_argument("input", help="PGM directory or raw blob with JSON sidecar.")
    p.add_argument("--ground-truth", help="CSV t,rp of the true respiratory pattern.")
    p.add_argument("--fps", type=float, help="Frame rate of a PGM directory without meta.json.")

    p = sub.add_parser("render", parents=[parent], help="Render a synthetic breathing video.")
    p.add_argument("--pattern", choices=[b.value for b in BreathingPattern], default="normal")
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--rate-hz", type=float, default=0.25)
    p.add_argument("--noise-sigma", type=float, default=1.0)
    p.add_argument("--patch-fraction", type=float, default=0.6)
    p.add_argument("--amplitude-px", type=float, default=1.0)
    p.add_argument("--raw", action="store_true", help="Write a raw blob instead of PGM files.")

    p = sub.add_parser("simulate", parents=[parent], help="Write a simulated channel matrix.")
    p.add_argument("--preset", default=PresetName.SINGLE.value)

    p = sub.add_parser("estimate", parents=[parent], help="Run the pipeline on a matrix file.")
    p.add_argument("matrix", help="Binary matrix written by 'simulate'.")
    p.add_argument("--w0-hz", type=float)
    p.add_argument("--ground-truth", help="CSV t,value of the generating signal.")
    return parser


def _run_command(args: argparse.Namespace, config: RunConfig, writer: OutputWriter) -> CommandOutcome:
    commands: dict[str, Callable[[], CommandOutcome]] = {
        "sweep-snr": lambda: cmd_sweep_snr(config, writer, args.presets, args.snr_list, args.n_seeds),
        "sweep-basisfreq": lambda: cmd_sweep_basisfreq(
            config, writer, args.preset, args.ratios, args.two_step, args.n_seeds
        ),
        "goe-curve": lambda: cmd_goe_curve(config, writer, args.preset),
        "video": lambda: cmd_video(config, writer, args.input, args.ground_truth, args.fps),
        "render": lambda: cmd_render(
            config,
            writer,
            args.pattern,
            args.width,
            args.height,
            args.fps,
            args.duration,
            args.rate_hz,
            args.noise_sigma,
            args.patch_fraction,
            args.amplitude_px,
            args.raw,
        ),
        "simulate": lambda: cmd_simulate(config, writer, args.preset),
        "estimate": lambda: cmd_estimate(config, writer, args.matrix, args.w0_hz, args.ground_truth),
    }
    return commands[args.command]()


def _report_error(error: BaseException, exit_code: int) -> int:
    payload = {"error": type(error).__name__, "message": str(error), "exit_code": exit_code}
    print(json.dumps(payload), file=sys.stderr)
    return exit_code


def main(argv: Sequence[str] | None = None) -> int:
    """Run one resp-deconv command.

    Args:
        argv (Sequence[str] | None): Arguments without the program name; ``sys.argv`` if None.

    Returns:
        int: Process exit code.

    """
    load_dotenv()
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    bind_run_context(args.command)
    logger.info("🚀 Starting %s", args.command)
    try:
        overrides: dict[str, Any] = {key: getattr(args, key) for key in CONFIG_FLAGS}
        config = load_run_config(args.config, overrides)
        bind_run_context(args.command, config.seed)
        writer = OutputWriter(config.output_dir)
        outcome = _run_command(args, config, writer)
        record_command_metrics(args.command, True, time.perf_counter() - start)
        writer.write_metrics()
        writer.write_manifest(args.command, config.to_dict(), config.seed, outcome.extra)
    except ConfigError as e:
        logger.error("❌ Configuration error: %s", e)
        record_command_metrics(args.command, False, time.perf_counter() - start)
        return _report_error(e, EXIT_CONFIG)
    except (SignalError, OSError) as e:
        logger.error("❌ %s failed: %s", args.command, e)
        record_command_metrics(args.command, False, time.perf_counter() - start)
        return _report_error(e, EXIT_RUNTIME)
    except Exception as e:
        logger.exception("❌ Unhandled exception: %s", e)
        record_command_metrics(args.command, False, time.perf_counter() - start)
        return _report_error(e, EXIT_UNEXPECTED)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
