"""Classical spatial saliency: Canny edges fused with LAB chromatic variance.

The pixel-level map is a weighted sum of a binary edge map and a windowed
chromatic-variance map (a/b channels only, luminance excluded), each
normalized to [0, 1]. Per-patch means of the map drive the four-way storage
decision: FP16 above the high threshold, INT8 and INT4 in the middle bands,
prune at the bottom. All windowed operations replicate the border.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .frames import Frame, PatchGrid


class Tier(str, Enum):
    """Storage decision for one patch token; REUSED is a store-level marker only."""

    FP16 = "fp16"
    INT8 = "int8"
    INT4 = "int4"
    PRUNE = "prune"
    REUSED = "reused"


# ordering used by monotonicity checks: more salient -> more precise
TIER_PRECISION = {Tier.PRUNE: 0, Tier.INT4: 1, Tier.INT8: 2, Tier.FP16: 3}


@dataclass(frozen=True)
class SaliencyConfig:
    gaussian_sigma: float = 1.4
    canny_low: float = 0.10
    canny_high: float = 0.25
    variance_window: int = 11
    edge_weight: float = 0.5
    variance_weight: float = 0.5
    tier_high: float = 0.60
    tier_med: float = 0.35
    tier_low: float = 0.15

    def __post_init__(self):
        if self.gaussian_sigma <= 0:
            raise ConfigError("gaussian_sigma must be > 0")
        if not 0 < self.canny_low < self.canny_high <= 1:
            raise ConfigError("need 0 < canny_low < canny_high <= 1")
        if self.variance_window < 3 or self.variance_window % 2 == 0:
            raise ConfigError("variance_window must be odd and >= 3")
        if self.edge_weight < 0 or self.variance_weight < 0:
            raise ConfigError("fusion weights must be >= 0")
        if abs(self.edge_weight + self.variance_weight - 1.0) > 1e-9:
            raise ConfigError("edge_weight + variance_weight must equal 1")
        if not 0 <= self.tier_low < self.tier_med < self.tier_high <= 1:
            raise ConfigError("need 0 <= tier_low < tier_med < tier_high <= 1")


@dataclass(frozen=True)
class SaliencyMap:
    """Per-pixel saliency in [0, 1], same dimensions as the source frame."""

    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError("saliency map must be 2-D")
        if self.values.size and (self.values.min() < 0 or self.values.max() > 1):
            raise ValueError("saliency values must lie in [0, 1]")


def _grayscale(frame: Frame) -> np.ndarray:
    rgb = frame.as_float()
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def _gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    radius = int(np.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    kernel /= kernel.sum()
    out = ndimage.correlate1d(image, kernel, axis=0, mode="nearest")
    return ndimage.correlate1d(out, kernel, axis=1, mode="nearest")


_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.float64)

# neighbor offsets (dy, dx) for the four quantized gradient directions:
# 0 = horizontal gradient (E/W), 1 = diagonal NE/SW, 2 = vertical, 3 = NW/SE
_DIRECTION_OFFSETS = ((0, 1), (-1, 1), (-1, 0), (-1, -1))


def _shift(image: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Shift with replicate border: result[y, x] = image[clamp(y+dy), clamp(x+dx)]."""
    h, w = image.shape
    ys = np.clip(np.arange(h) + dy, 0, h - 1)
    xs = np.clip(np.arange(w) + dx, 0, w - 1)
    return image[np.ix_(ys, xs)]


def _nonmax_suppress(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    angle = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    sector = np.zeros(mag.shape, dtype=np.int8)
    sector[(angle >= 22.5) & (angle < 67.5)] = 1
    sector[(angle >= 67.5) & (angle < 112.5)] = 2
    sector[(angle >= 112.5) & (angle < 157.5)] = 3

    suppressed = np.zeros_like(mag)
    for s, (dy, dx) in enumerate(_DIRECTION_OFFSETS):
        ahead = _shift(mag, dy, dx)
        behind = _shift(mag, -dy, -dx)
        # strict on one side so a two-pixel plateau thins to a single line
        keep = (sector == s) & (mag > ahead) & (mag >= behind)
        suppressed[keep] = mag[keep]
    return suppressed


def canny_edges(frame: Frame, config: SaliencyConfig) -> np.ndarray:
    """Binary edge map via the standard Canny stages.

    Grayscale (ITU-R 601 luma), Gaussian blur with kernel radius ceil(3*sigma),
    Sobel 3x3 gradients, magnitude normalized by its frame maximum, non-maximum
    suppression over four quantized directions, then double-threshold
    hysteresis with 8-connectivity. An all-flat frame yields an empty map.
    """
    gray = _grayscale(frame)
    blurred = _gaussian_blur(gray, config.gaussian_sigma)
    gx = ndimage.correlate(blurred, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(blurred, _SOBEL_Y, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak == 0.0:
        return np.zeros(mag.shape, dtype=bool)
    mag /= peak

    thin = _nonmax_suppress(mag, gx, gy)
    weak = thin >= config.canny_low
    strong = thin >= config.canny_high
    if not strong.any():
        return np.zeros(mag.shape, dtype=bool)
    labels, _ = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    kept = np.unique(labels[strong])
    return np.isin(labels, kept[kept > 0])


# sRGB D65 -> XYZ (linear-light) matrix and D65 reference white
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])
_LAB_DELTA = 6.0 / 29.0


def _srgb_to_lab_array(rgb01: np.ndarray) -> np.ndarray:
    """(..., 3) sRGB values in [0, 1] -> (..., 3) CIELAB, D65 white."""
    linear = np.where(
        rgb01 <= 0.04045,
        rgb01 / 12.92,
        ((rgb01 + 0.055) / 1.055) ** 2.4,
    )
    xyz = linear @ _RGB_TO_XYZ.T
    t = xyz / _WHITE_D65
    f = np.where(
        t > _LAB_DELTA**3,
        np.cbrt(t),
        t / (3.0 * _LAB_DELTA**2) + 4.0 / 29.0,
    )
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def rgb_to_lab(frame: Frame) -> np.ndarray:
    """Frame -> (H, W, 3) CIELAB image: L in [0, 100], a/b roughly [-128, 127]."""
    return _srgb_to_lab_array(frame.as_float())


def chromatic_variance(lab: np.ndarray, window: int) -> np.ndarray:
    """Windowed var(a) + var(b) per pixel, normalized by the frame maximum.

    Border pixels use the replicated border. A chromatically constant frame
    maps to all zeros.
    """
    if window < 3 or window % 2 == 0:
        raise ConfigError("variance window must be odd and >= 3")
    total = np.zeros(lab.shape[:2])
    for channel in (1, 2):
        # shift by the global mean so a constant channel gives exact zeros
        # instead of normalized cancellation noise
        x = lab[..., channel]
        x = x - x.mean()
        mean = ndimage.uniform_filter(x, size=window, mode="nearest")
        mean_sq = ndimage.uniform_filter(x * x, size=window, mode="nearest")
        total += np.maximum(mean_sq - mean * mean, 0.0)
    peak = total.max()
    if peak == 0.0:
        return np.zeros_like(total)
    return total / peak


def fuse_saliency(
    edges: np.ndarray, variance_map: np.ndarray, config: SaliencyConfig
) -> SaliencyMap:
    """Weighted sum of the binary edge map and the variance map, clamped to [0, 1]."""
    if edges.shape != variance_map.shape:
        raise ValueError(f"dimension mismatch: {edges.shape} vs {variance_map.shape}")
    fused = config.edge_weight * edges.astype(np.float64) + config.variance_weight * variance_map
    return SaliencyMap(values=np.clip(fused, 0.0, 1.0))


def saliency_map(frame: Frame, config: SaliencyConfig) -> SaliencyMap:
    """Full pipeline: Canny edges + chromatic variance, fused."""
    edges = canny_edges(frame, config)
    variance = chromatic_variance(rgb_to_lab(frame), config.variance_window)
    return fuse_saliency(edges, variance, config)


def patch_saliency(saliency: SaliencyMap, grid: PatchGrid) -> np.ndarray:
    """Mean saliency over each patch, row-major, length patch_count."""
    values = saliency.values
    p = grid.patch_size
    if values.shape != (grid.rows * p, grid.cols * p):
        raise ValueError(
            f"saliency map shape {values.shape} does not cover the "
            f"{grid.rows}x{grid.cols} grid at patch size {p}"
        )
    blocks = values.reshape(grid.rows, p, grid.cols, p)
    return blocks.mean(axis=(1, 3)).reshape(-1)


def assign_tier(score: float, config: SaliencyConfig) -> Tier:
    """Four-way storage decision with strict lower and weak upper bounds per band."""
    if score > config.tier_high:
        return Tier.FP16
    if score > config.tier_med:
        return Tier.INT8
    if score > config.tier_low:
        return Tier.INT4
    return Tier.PRUNE


def assign_tiers(scores: np.ndarray, config: SaliencyConfig) -> list[Tier]:
    return [assign_tier(float(s), config) for s in scores]
