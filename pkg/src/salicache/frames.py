"""Frame ingestion and partition into patch tokens.

Frames are 8-bit RGB images loaded from binary PPM (P6) files or generated
synthetically. A frame is split into a grid of non-overlapping P x P patches;
each patch becomes one token position for the cache and attention stages.
Non-divisible dimensions are a hard error everywhere: silently cropping or
padding would break the patch <-> token correspondence downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FileFormatError

SCENARIOS = ("static", "moving_square", "noise", "composite")


@dataclass(frozen=True)
class Frame:
    """One RGB video frame. ``pixels`` is row-major uint8 with shape (height, width, 3)."""

    width: int
    height: int
    pixels: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError(
                f"pixel buffer shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x3"
            )
        if self.pixels.dtype != np.uint8:
            raise ValueError("pixels must be uint8")
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")

    def as_float(self) -> np.ndarray:
        """Pixels scaled to [0, 1] float64; the boundary for all numeric ops."""
        return self.pixels.astype(np.float64) / 255.0

    def with_index(self, frame_index: int) -> "Frame":
        return Frame(self.width, self.height, self.pixels, frame_index)


@dataclass(frozen=True)
class PatchGrid:
    """Partition of a frame into non-overlapping square patches, row-major indexed."""

    patch_size: int
    rows: int
    cols: int

    @property
    def patch_count(self) -> int:
        return self.rows * self.cols

    def patch_bounds(self, patch_idx: int) -> tuple[int, int, int, int]:
        """(y0, y1, x0, x1) pixel bounds of patch ``patch_idx``, half-open."""
        if not 0 <= patch_idx < self.patch_count:
            raise IndexError(f"patch index {patch_idx} out of range")
        row, col = divmod(patch_idx, self.cols)
        p = self.patch_size
        return row * p, (row + 1) * p, col * p, (col + 1) * p


@dataclass
class FrameManifest:
    """Ordered list of frame files plus the patch size they are meant to be cut at."""

    patch_size: int
    paths: list[Path]
    declared_dims: tuple[int, int] | None = field(default=None)


def load_manifest(path: str | Path) -> FrameManifest:
    """Parse a frame manifest: ``{"patch_size": int, "frames": [path, ...]}``.

    Listed paths are resolved relative to the manifest's directory. Missing
    frame files are not detected here; they fail when that frame is loaded.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"malformed manifest {path}: {exc}") from exc
    if not isinstance(doc, dict) or "patch_size" not in doc or "frames" not in doc:
        raise FileFormatError(
            f"malformed manifest {path}: expected keys 'patch_size' and 'frames'"
        )
    patch_size = doc["patch_size"]
    frames = doc["frames"]
    if not isinstance(patch_size, int) or patch_size < 1:
        raise FileFormatError(f"malformed manifest {path}: patch_size must be a positive int")
    if not isinstance(frames, list) or not all(isinstance(f, str) for f in frames):
        raise FileFormatError(f"malformed manifest {path}: frames must be a list of paths")
    if len(frames) == 0:
        raise FileFormatError(f"empty frame list in manifest {path}")
    dims = None
    if "width" in doc and "height" in doc:
        dims = (int(doc["width"]), int(doc["height"]))
    base = path.parent
    return FrameManifest(patch_size=patch_size, paths=[base / f for f in frames], declared_dims=dims)


def _read_ppm_header(data: bytes, path: Path) -> tuple[int, int, int, int]:
    """Parse a P6 header, allowing '#' comments between tokens.

    Returns (width, height, maxval, offset-of-first-pixel-byte).
    """
    if data[:2] == b"P6":
        pos = 2
    elif len(data) >= 2 and data[0:1] == b"P" and data[1:2].isdigit():
        raise FileFormatError(f"unsupported PPM variant in {path}: magic {data[:2]!r}, expected P6")
    else:
        raise FileFormatError(f"not a PPM file: {path}")

    fields: list[int] = []
    n = len(data)
    while len(fields) < 3:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise FileFormatError(f"malformed PPM header in {path}")
        fields.append(int(token))
    # exactly one whitespace byte separates maxval from the pixel bytes
    pos += 1
    width, height, maxval = fields
    return width, height, maxval, pos


def load_frame(
    path: str | Path,
    expected_dims: tuple[int, int] | None = None,
    frame_index: int = 0,
) -> Frame:
    """Load a binary PPM (P6, maxval 255) frame; pixels are copied verbatim."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"frame file not found: {path}")
    data = path.read_bytes()
    width, height, maxval, offset = _read_ppm_header(data, path)
    if maxval != 255:
        raise FileFormatError(f"unsupported PPM maxval {maxval} in {path}, expected 255")
    if expected_dims is not None and (width, height) != tuple(expected_dims):
        raise FileFormatError(
            f"dimension mismatch in {path}: got {width}x{height}, expected "
            f"{expected_dims[0]}x{expected_dims[1]}"
        )
    need = width * height * 3
    payload = data[offset : offset + need]
    if len(payload) < need:
        raise FileFormatError(f"truncated pixel data in {path}: {len(payload)} of {need} bytes")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()
    return Frame(width=width, height=height, pixels=pixels, frame_index=frame_index)


def write_frame(frame: Frame, path: str | Path) -> None:
    """Write a frame as binary PPM P6, maxval 255. Round-trips byte-identically."""
    header = f"P6\n{frame.width} {frame.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + frame.pixels.tobytes())


def load_sequence(manifest: FrameManifest) -> list[Frame]:
    """Load every frame in manifest order, enforcing uniform dimensions."""
    frames: list[Frame] = []
    dims = manifest.declared_dims
    for i, p in enumerate(manifest.paths):
        frame = load_frame(p, expected_dims=dims, frame_index=i)
        if dims is None:
            dims = (frame.width, frame.height)
        frames.append(frame)
    return frames


def make_grid(frame: Frame, patch_size: int) -> PatchGrid:
    """Partition a frame into a patch grid; non-divisible dimensions are an error."""
    if patch_size < 1:
        raise ConfigError(f"patch size must be >= 1, got {patch_size}")
    if frame.width % patch_size or frame.height % patch_size:
        raise ConfigError(
            f"dimensions not divisible by patch size: frame is "
            f"{frame.width}x{frame.height}, patch size {patch_size}; "
            "re-encode the input to a multiple of the patch size"
        )
    return PatchGrid(
        patch_size=patch_size,
        rows=frame.height // patch_size,
        cols=frame.width // patch_size,
    )


def _texture(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    return rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)


def _paint_square(pixels: np.ndarray, x: int, y: int, side: int) -> None:
    pixels[y : y + side, x : x + side] = (255, 255, 255)
    # 1-px dark border keeps a strong luma edge against any background
    pixels[y, x : x + side] = (10, 10, 10)
    pixels[y + side - 1, x : x + side] = (10, 10, 10)
    pixels[y : y + side, x] = (10, 10, 10)
    pixels[y : y + side, x + side - 1] = (10, 10, 10)


def _pingpong(t: int, span: int) -> int:
    """Triangle wave over [0, span] advancing 1 unit per step."""
    if span <= 0:
        return 0
    period = 2 * span
    phase = t % period
    return phase if phase <= span else period - phase


_CHECKER_HI = np.array([245.0, 245.0, 10.0])
_CHECKER_LO = np.array([15.0, 15.0, 245.0])
_COMPOSITE_BASE = np.array([120.0, 120.0, 120.0])


def _checker_block(height: int, width: int, tile: int, strength: float) -> np.ndarray:
    """Yellow/blue checkerboard faded toward the base gray by ``strength``."""
    yy, xx = np.mgrid[0:height, 0:width]
    mask = ((yy // tile + xx // tile) % 2) == 0
    hi = np.clip(_COMPOSITE_BASE + strength * (_CHECKER_HI - _COMPOSITE_BASE), 0, 255)
    lo = np.clip(_COMPOSITE_BASE + strength * (_CHECKER_LO - _COMPOSITE_BASE), 0, 255)
    block = np.zeros((height, width, 3), dtype=np.uint8)
    block[mask] = hi.astype(np.uint8)
    block[~mask] = lo.astype(np.uint8)
    return block


def _composite_background(width: int, height: int) -> np.ndarray:
    """Flat left half plus checkerboards of graded contrast on the right.

    The contrast grading spreads patch saliency across all four storage tiers
    under the default thresholds: full-strength tiles reach the top band,
    faded tiles land in the middle bands, and the flat area stays at zero.
    """
    pixels = np.full((height, width, 3), 120, dtype=np.uint8)
    hx, hy = width // 2, height // 2
    qx = hx + (width - hx) // 2
    pixels[0:hy, hx:width] = _checker_block(hy, width - hx, 4, 1.0)
    pixels[hy:height, hx:qx] = _checker_block(height - hy, qx - hx, 4, 0.8)
    pixels[hy:height, qx:width] = _checker_block(height - hy, width - qx, 4, 0.5)
    return pixels


def synth_sequence(
    scenario: str,
    frame_count: int,
    dims: tuple[int, int],
    patch_size: int,
    seed: int,
) -> list[Frame]:
    """Generate a deterministic synthetic frame sequence.

    Scenarios:
      static        one seeded noise-texture frame repeated exactly
      moving_square high-contrast square translating 1 px/frame (ping-pong) on
                    a uniform background
      noise         i.i.d. uniform RGB per frame
      composite     static textured background (flat, checkerboard and noise
                    regions) plus a square that moves 1 px on two of every
                    three frames and holds on the third

    Pure function of (scenario, frame_count, dims, patch_size, seed).
    """
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    if frame_count < 1:
        raise ConfigError("frame_count must be >= 1")
    width, height = dims
    if width % patch_size or height % patch_size:
        raise ConfigError(
            f"dimensions {width}x{height} not divisible by patch size {patch_size}"
        )
    rng = np.random.default_rng(seed)
    frames: list[Frame] = []

    if scenario == "static":
        base = _texture(rng, width, height)
        for t in range(frame_count):
            frames.append(Frame(width, height, base.copy(), t))

    elif scenario == "moving_square":
        side = max(4, min(width, height) // 4)
        y = (height - side) // 2
        span = width - side
        for t in range(frame_count):
            pixels = np.full((height, width, 3), 40, dtype=np.uint8)
            _paint_square(pixels, _pingpong(t, span), y, side)
            frames.append(Frame(width, height, pixels, t))

    elif scenario == "noise":
        for t in range(frame_count):
            frames.append(Frame(width, height, _texture(rng, width, height), t))

    else:  # composite
        background = _composite_background(width, height)
        side = max(4, min(width, height) // 6)
        y = height // 8
        span = width // 2 - side
        pos = 0
        for t in range(frame_count):
            if t > 0 and t % 3 != 0:
                pos += 1  # holds still on every third frame -> redundant frame
            pixels = background.copy()
            _paint_square(pixels, _pingpong(pos, span), y, side)
            frames.append(Frame(width, height, pixels, t))

    return frames
