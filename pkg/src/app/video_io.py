"""Grayscale frame sequences: loading, pixel pruning, pixel time series and synthetic renders.

Frames live on disk either as a directory of binary PGM files named ``frame_%06d.pgm`` (with an
optional ``meta.json`` holding the frame rate) or as one raw 8-bit blob next to a JSON sidecar
``{width, height, fps, n_frames}``.
"""

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray
from PIL import Image, UnidentifiedImageError
from scipy.integrate import cumulative_trapezoid
from scipy.ndimage import gaussian_filter
from scipy.signal import get_window

from app.periodic_signal import SampledSignal
from app.utils.errors import (
    ConfigError,
    CorruptHeaderError,
    DimensionMismatchError,
    EmptySelectionError,
    NyquistViolationError,
    TooFewFramesError,
)
from app.utils.setup_logger import setup_logger
from app.utils.types import BreathingPattern, parse_enum
from app.utils.validate_data import validate_positive

logger = setup_logger(__name__)

FRAME_PATTERN = re.compile(r"^frame_(\d+)\.pgm$")
FRAME_META = "meta.json"
DEFAULT_FPS = 30.0
DEFAULT_PERCENTILE = 80.0
DEFAULT_MIN_RR_HZ = 0.1

TEXTURE_MEAN = 128.0
TEXTURE_STD = 40.0
TEXTURE_SIGMA_PX = 4.0
# vertical oversampling of the moving texture, keeps linear interpolation kinks sub-pixel
TEXTURE_OVERSAMPLE = 16
BREATH_RAMP_S = 2.0


@dataclass(frozen=True, eq=False)
class FrameSequence:
    """8-bit grayscale frames of shape (T, H, W) captured at ``fps``."""

    frames: NDArray[np.uint8]
    fps: float

    def __post_init__(self) -> None:
        """Check the frame stack."""
        frames = np.asarray(self.frames)
        if frames.ndim != 3:
            raise DimensionMismatchError(f"frames must be (T, H, W), got shape {frames.shape}")
        if frames.dtype != np.uint8:
            raise ConfigError(f"frames must be 8-bit grayscale, got {frames.dtype}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "fps", validate_positive(self.fps, "fps"))

    @property
    def n_frames(self) -> int:
        """Number of frames."""
        return int(self.frames.shape[0])

    @property
    def height(self) -> int:
        """Rows per frame."""
        return int(self.frames.shape[1])

    @property
    def width(self) -> int:
        """Columns per frame."""
        return int(self.frames.shape[2])

    @property
    def duration(self) -> float:
        """Covered duration in seconds."""
        return self.n_frames / self.fps


@dataclass(frozen=True, eq=False)
class PixelSelection:
    """Unique (row, col) pixels kept by pruning.

    Attributes:
        indices: (n, 2) integer array of (row, col), row-major order.
        threshold_percentile: Percentile of the difference image used as the cut.
        threshold_value: The difference value at that percentile.

    """

    indices: NDArray[np.int64]
    threshold_percentile: float
    threshold_value: float = 0.0

    def __post_init__(self) -> None:
        """Check that the selection is non-empty and unique."""
        indices = np.asarray(self.indices, dtype=np.int64).reshape(-1, 2)
        if indices.shape[0] == 0:
            raise EmptySelectionError("pixel selection is empty")
        if np.unique(indices, axis=0).shape[0] != indices.shape[0]:
            raise ConfigError("pixel selection holds duplicate pixels")
        object.__setattr__(self, "indices", indices)

    def __len__(self) -> int:
        """Return the number of selected pixels."""
        return int(self.indices.shape[0])


@dataclass(frozen=True, eq=False)
class RenderResult:
    """Synthetic video with the ground truth that produced it."""

    frames: FrameSequence
    rp: SampledSignal
    mask: NDArray[np.bool_]


def _read_pgm(path: Path) -> NDArray[np.uint8]:
    try:
        with Image.open(path) as image:
            if image.mode != "L":
                raise CorruptHeaderError(f"{path} is mode {image.mode}, expected 8-bit grayscale")
            return np.asarray(image, dtype=np.uint8).copy()
    except UnidentifiedImageError as e:
        raise CorruptHeaderError(f"{path} is not a readable PGM: {e}") from e


def _load_directory(directory: Path, fps: float | None, workers: int) -> FrameSequence:
    numbered = []
    for entry in directory.iterdir():
        match = FRAME_PATTERN.match(entry.name)
        if match:
            numbered.append((int(match.group(1)), entry))
    if not numbered:
        raise FileNotFoundError(f"no frame_%06d.pgm files in {directory}")
    paths = [p for _, p in sorted(numbered)]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            images = list(pool.map(_read_pgm, paths))
    else:
        images = [_read_pgm(p) for p in paths]

    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise DimensionMismatchError(f"frames in {directory} have mixed sizes: {sorted(shapes)}")

    meta_path = directory / FRAME_META
    if fps is None and meta_path.exists():
        fps = float(json.loads(meta_path.read_text()).get("fps", DEFAULT_FPS))
    logger.debug("📥 Loaded %d PGM frames from %s", len(images), directory)
    return FrameSequence(np.stack(images), fps if fps is not None else DEFAULT_FPS)


def _load_blob(blob: Path) -> FrameSequence:
    sidecar_path = blob.with_suffix(".json")
    try:
        sidecar = json.loads(sidecar_path.read_text())
        width, height = int(sidecar["width"]), int(sidecar["height"])
        n_frames, fps = int(sidecar["n_frames"]), float(sidecar["fps"])
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptHeaderError(f"sidecar {sidecar_path} is incomplete: {e}") from e
    data = np.fromfile(blob, dtype=np.uint8)
    if data.size != width * height * n_frames:
        raise CorruptHeaderError(
            f"{blob} holds {data.size} bytes, sidecar expects {n_frames} x {height} x {width}"
        )
    logger.debug("📥 Loaded %d raw frames from %s", n_frames, blob)
    return FrameSequence(data.reshape(n_frames, height, width), fps)


def load_frames(path: str | Path, fps: float | None = None, workers: int = 1) -> FrameSequence:
    """Load a PGM directory or a raw blob with its JSON sidecar.

    Args:
        path (str | Path): Directory of ``frame_%06d.pgm`` files, or the raw blob file.
        fps (float | None): Frame rate for PGM directories without ``meta.json``.
        workers (int): Threads decoding PGM files; frame order never depends on it.

    Returns:
        FrameSequence: Frames in filename-index or blob order.

    Raises:
        DimensionMismatchError: If PGM frames differ in size.
        CorruptHeaderError: If a file is unreadable or the blob disagrees with its sidecar.

    """
    target = Path(path)
    if target.is_dir():
        return _load_directory(target, fps, workers)
    return _load_blob(target)


def save_frames(seq: FrameSequence, path: str | Path, raw: bool = False) -> Path:
    """Write frames as a PGM directory (with ``meta.json``) or a raw blob with sidecar."""
    target = Path(path)
    meta = {"width": seq.width, "height": seq.height, "fps": seq.fps, "n_frames": seq.n_frames}
    if raw:
        target.parent.mkdir(parents=True, exist_ok=True)
        np.ascontiguousarray(seq.frames).tofile(target)
        target.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return target
    target.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        Image.fromarray(frame).save(target / f"frame_{i:06d}.pgm")
    (target / FRAME_META).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return target


def prune(
    seq: FrameSequence,
    min_rr_hz: float = DEFAULT_MIN_RR_HZ,
    threshold_percentile: float = DEFAULT_PERCENTILE,
) -> PixelSelection:
    """Keep the pixels that change most between frame 0 and frame ``round(fps / min_rr_hz)``.

    Args:
        seq (FrameSequence): Video.
        min_rr_hz (float): Slowest breathing rate; sets the frame spacing.
        threshold_percentile (float): Pixels at or above this percentile of the absolute
            difference image are kept. When that value is 0, only changed pixels are kept.

    Returns:
        PixelSelection: Selected pixels in row-major order.

    Raises:
        TooFewFramesError: If the video is not longer than the frame spacing.
        EmptySelectionError: If the two frames are identical.
        ConfigError: If the percentile is outside [0, 100].

    """
    validate_positive(min_rr_hz, "min_rr_hz")
    if not 0.0 <= threshold_percentile <= 100.0:
        raise ConfigError(f"percentile must lie in [0, 100], got {threshold_percentile}")
    k = int(round(seq.fps / min_rr_hz))
    if seq.n_frames <= k:
        raise TooFewFramesError(f"pruning compares frames 0 and {k}, video has {seq.n_frames}")
    diff = np.abs(seq.frames[k].astype(np.int16) - seq.frames[0].astype(np.int16))
    if int(diff.max()) == 0:
        raise EmptySelectionError(f"frames 0 and {k} are identical; nothing moves")
    threshold = float(np.percentile(diff, threshold_percentile))
    if threshold == 0.0 and threshold_percentile > 0.0:
        mask = diff > 0
    else:
        mask = diff >= threshold
    rows, cols = np.nonzero(mask)
    logger.debug(
        "📊 Pruned to %d of %d pixels (p%.0f = %.1f)", rows.size, diff.size, threshold_percentile, threshold
    )
    return PixelSelection(np.column_stack([rows, cols]), float(threshold_percentile), threshold)


def extract_pts(seq: FrameSequence, sel: PixelSelection) -> NDArray[np.float64]:
    """Zero-mean intensity trace of every selected pixel as an (n, T) matrix."""
    rows, cols = sel.indices[:, 0], sel.indices[:, 1]
    if rows.max() >= seq.height or cols.max() >= seq.width or sel.indices.min() < 0:
        raise DimensionMismatchError("pixel selection lies outside the frame")
    traces = seq.frames[:, rows, cols].T.astype(np.float64)
    return np.asarray(traces - traces.mean(axis=1, keepdims=True), dtype=np.float64)


def _texture(rng: np.random.Generator, shape: tuple[int, int], sigma: tuple[float, float]) -> NDArray[np.float64]:
    field = gaussian_filter(rng.standard_normal(shape), sigma=sigma, mode="wrap")
    field = (field - field.mean()) / field.std()
    return np.asarray(TEXTURE_MEAN + TEXTURE_STD * field, dtype=np.float64)


def _check_band_limit(rp: SampledSignal, fps: float) -> None:
    # a signal sampled no faster than the video cannot hold content above its Nyquist rate
    if rp.sample_rate <= fps:
        return
    tapered = (rp.samples - rp.samples.mean()) * get_window("hann", rp.samples.size)
    magnitude = np.abs(np.fft.rfft(tapered))
    freqs = np.fft.rfftfreq(rp.samples.size, 1.0 / rp.sample_rate)
    peak = float(magnitude.max()) if magnitude.size else 0.0
    if peak > 0.0 and np.any(magnitude[freqs >= fps / 2.0] > 1e-3 * peak):
        raise NyquistViolationError(f"rp carries energy at or above {fps / 2.0} Hz")


def render_synthetic(
    width: int,
    height: int,
    fps: float,
    duration: float,
    rp: SampledSignal,
    texture_seed: int = 0,
    noise_sigma: float = 1.0,
    patch_fraction: float = 0.6,
    amplitude_px: float = 1.0,
    texture_sigma: float = TEXTURE_SIGMA_PX,
) -> RenderResult:
    """Render a textured patch moving vertically with ``rp`` over a static textured background.

    The patch is centred and covers ``patch_fraction`` of each frame dimension. Its vertical
    displacement is ``amplitude_px * rp / max|rp|`` with ``rp`` linearly resampled at the frame
    instants. Gaussian sensor noise of ``noise_sigma`` gray levels is added before rounding and
    clipping to 8 bits.

    Args:
        width (int): Frame width in pixels.
        height (int): Frame height in pixels.
        fps (float): Frame rate in Hz.
        duration (float): Length in seconds.
        rp (SampledSignal): Respiratory pattern driving the displacement.
        texture_seed (int): Root seed for the textures and the noise.
        noise_sigma (float): Standard deviation of the sensor noise.
        patch_fraction (float): Side fraction of the moving patch in (0, 1].
        amplitude_px (float): Peak displacement in pixels.
        texture_sigma (float): Gaussian smoothing of the textures in pixels.

    Returns:
        RenderResult: Frames, the rp at the frame rate and the moving mask.

    Raises:
        NyquistViolationError: If ``rp`` has content at or above ``fps / 2``.
        ConfigError: If a size, rate or ``amplitude_px`` is not positive.

    """
    validate_positive(fps, "fps")
    validate_positive(duration, "duration")
    validate_positive(amplitude_px, "amplitude_px")
    if width < 4 or height < 4:
        raise ConfigError(f"frame must be at least 4x4, got {width}x{height}")
    if not 0.0 < patch_fraction <= 1.0:
        raise ConfigError(f"patch_fraction must lie in (0, 1], got {patch_fraction}")
    if noise_sigma < 0:
        raise ConfigError(f"noise sigma must be non-negative, got {noise_sigma}")
    _check_band_limit(rp, fps)

    n_frames = int(round(duration * fps))
    frame_times = np.arange(n_frames) / fps
    values = np.interp(frame_times, rp.times, rp.samples)
    scale = float(np.max(np.abs(values)))
    displacement = amplitude_px * values / scale if scale > 0 else np.zeros(n_frames)

    bg_seq, patch_seq, noise_seq = np.random.SeedSequence(texture_seed).spawn(3)
    background = _texture(np.random.default_rng(bg_seq), (height, width), (texture_sigma, texture_sigma))

    patch_h = max(1, int(round(patch_fraction * height)))
    patch_w = max(1, int(round(patch_fraction * width)))
    top, left = (height - patch_h) // 2, (width - patch_w) // 2
    mask = np.zeros((height, width), dtype=bool)
    mask[top : top + patch_h, left : left + patch_w] = True

    margin = int(np.ceil(amplitude_px)) + 2
    os_ = TEXTURE_OVERSAMPLE
    fine = _texture(
        np.random.default_rng(patch_seq),
        ((patch_h + 2 * margin) * os_, patch_w),
        (texture_sigma * os_, texture_sigma),
    )
    noise_rng = np.random.default_rng(noise_seq)

    frames = np.empty((n_frames, height, width), dtype=np.uint8)
    rows = np.arange(patch_h, dtype=np.float64)
    for f in range(n_frames):
        position = (rows + margin - displacement[f]) * os_
        lower = np.floor(position).astype(np.int64)
        frac = (position - lower)[:, np.newaxis]
        canvas = background.copy()
        canvas[top : top + patch_h, left : left + patch_w] = fine[lower] * (1.0 - frac) + fine[lower + 1] * frac
        if noise_sigma > 0:
            canvas += noise_sigma * noise_rng.standard_normal(canvas.shape)
        frames[f] = np.clip(np.rint(canvas), 0, 255).astype(np.uint8)

    logger.debug("🎞️ Rendered %d frames of %dx%d at %.1f fps", n_frames, width, height, fps)
    return RenderResult(FrameSequence(frames, fps), SampledSignal(values, fps), mask)


def breathing_pattern(
    kind: str | BreathingPattern,
    duration: float,
    fps: float = DEFAULT_FPS,
    rate_hz: float = 0.25,
    amplitude: float = 1.0,
) -> SampledSignal:
    """Controlled breathing waveform starting at full excursion.

    ``deep`` doubles the amplitude, ``fast`` doubles the rate and ``breath_hold`` stops the
    motion. Three-part kinds apply the change to the middle third with linear ramps of
    ``BREATH_RAMP_S`` seconds; the phase is integrated so the waveform stays continuous.

    Args:
        kind (str | BreathingPattern): Pattern name.
        duration (float): Length in seconds.
        fps (float): Sampling rate in Hz.
        rate_hz (float): Baseline breathing rate.
        amplitude (float): Baseline amplitude.

    Returns:
        SampledSignal: ``amp(t) * cos(2*pi * integral(rate))``; ``metadata["rate_hz"]`` holds
            the instantaneous rate.

    """
    pattern = parse_enum(BreathingPattern, kind)
    validate_positive(duration, "duration")
    validate_positive(fps, "fps")
    validate_positive(rate_hz, "rate_hz")
    n = int(round(duration * fps))
    t = np.arange(n) / fps

    amp_mid, rate_mid = amplitude, rate_hz
    if pattern in (BreathingPattern.DEEP, BreathingPattern.NORMAL_DEEP_NORMAL):
        amp_mid = 2.0 * amplitude
    elif pattern in (BreathingPattern.FAST, BreathingPattern.NORMAL_FAST_NORMAL):
        rate_mid = 2.0 * rate_hz
    elif pattern is BreathingPattern.BREATH_HOLD:
        amp_mid = 0.0

    if pattern in (BreathingPattern.NORMAL, BreathingPattern.DEEP, BreathingPattern.FAST):
        amp_env = np.full(n, amp_mid)
        rate_env = np.full(n, rate_mid)
    else:
        third = duration / 3.0
        half_ramp = min(BREATH_RAMP_S, third) / 2.0
        knots = [0.0, third - half_ramp, third + half_ramp, 2 * third - half_ramp, 2 * third + half_ramp, duration]
        amp_env = np.interp(t, knots, [amplitude, amplitude, amp_mid, amp_mid, amplitude, amplitude])
        rate_env = np.interp(t, knots, [rate_hz, rate_hz, rate_mid, rate_mid, rate_hz, rate_hz])

    phase = 2.0 * np.pi * cumulative_trapezoid(rate_env, dx=1.0 / fps, initial=0.0)
    meta: dict[str, Any] = {"pattern": pattern.value, "rate_hz": rate_env}
    return SampledSignal(amp_env * np.cos(phase), float(fps), 0.0, meta)
