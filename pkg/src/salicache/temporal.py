"""Inter-frame redundancy detection.

Per-patch difference is the RMS of the per-channel pixel deltas (in [0, 1]
units), so the threshold is independent of patch size and resolution. A frame
whose fraction of near-still patches exceeds the redundancy threshold is
classified redundant and its cache entries are reused wholesale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .frames import Frame, PatchGrid

VERDICT_REDUNDANT = "redundant"
VERDICT_NOVEL = "novel"


@dataclass(frozen=True)
class TemporalConfig:
    """Thresholds for the temporal filter.

    diff_threshold: per-patch RMS pixel difference below which a patch counts
        as unchanged (CLI flag --tau-t).
    redundancy_threshold: fraction of unchanged patches above which the whole
        frame is redundant (CLI flag --theta-r).
    """

    diff_threshold: float = 0.02
    redundancy_threshold: float = 0.90

    def __post_init__(self):
        if self.diff_threshold < 0:
            raise ConfigError("diff_threshold must be >= 0")
        if not 0.0 <= self.redundancy_threshold <= 1.0:
            raise ConfigError("redundancy_threshold must be in [0, 1]")


@dataclass(frozen=True)
class RedundancyReport:
    """Outcome of the frame-level redundancy decision."""

    deltas: np.ndarray
    redundant_mask: np.ndarray
    redundant_fraction: float
    verdict: str

    @property
    def is_redundant(self) -> bool:
        return self.verdict == VERDICT_REDUNDANT


def patch_deltas(prev: Frame, curr: Frame, grid: PatchGrid) -> np.ndarray:
    """RMS pixel difference per patch between two consecutive frames.

    Each delta is the root mean square over the 3*P*P channel values of the
    patch difference, with pixels scaled to [0, 1]; results lie in [0, 1].
    """
    if (prev.width, prev.height) != (curr.width, curr.height):
        raise ValueError(
            f"dimension mismatch: {prev.width}x{prev.height} vs {curr.width}x{curr.height}"
        )
    if grid.rows * grid.patch_size != curr.height or grid.cols * grid.patch_size != curr.width:
        raise ValueError("grid does not cover the frames")
    p = grid.patch_size
    diff = curr.as_float() - prev.as_float()
    # (rows, P, cols, P, 3) -> mean of squares over each patch block
    blocks = diff.reshape(grid.rows, p, grid.cols, p, 3)
    mean_sq = np.mean(blocks**2, axis=(1, 3, 4))
    return np.sqrt(mean_sq).reshape(-1)


def frame_redundancy(deltas: np.ndarray, config: TemporalConfig) -> RedundancyReport:
    """Classify a frame from its patch deltas.

    Comparisons are strict on both sides: a patch is redundant only when its
    delta is strictly below the patch threshold, and the frame is redundant
    only when the redundant fraction strictly exceeds the frame threshold.
    Ties therefore fall on the non-redundant side.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    if deltas.size == 0:
        raise ValueError("empty delta list")
    mask = deltas < config.diff_threshold
    fraction = float(np.count_nonzero(mask)) / deltas.size
    verdict = VERDICT_REDUNDANT if fraction > config.redundancy_threshold else VERDICT_NOVEL
    return RedundancyReport(
        deltas=deltas,
        redundant_mask=mask,
        redundant_fraction=fraction,
        verdict=verdict,
    )
