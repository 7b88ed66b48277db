"""Pydantic request/response models for the benchmark service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..harness import METHODS


class RunRequest(BaseModel):
    """One comparison run. Exactly one of ``manifest`` / ``synthetic`` must be set."""

    manifest: str | None = Field(default=None, description="Path to a frame manifest (server-side)")
    synthetic: str | None = Field(
        default=None, description="Synthetic scenario: static, moving_square, noise or composite"
    )
    frames_count: int = Field(default=16, ge=1)
    width: int = Field(default=64, ge=1)
    height: int = Field(default=64, ge=1)
    patch_size: int = Field(default=16, ge=1)
    methods: list[str] = Field(default=list(METHODS))

    tau_t: float = Field(default=0.02, ge=0.0)
    theta_r: float = Field(default=0.90, ge=0.0, le=1.0)

    sigma: float = Field(default=1.4, gt=0.0)
    canny_low: float = Field(default=0.10, gt=0.0, le=1.0)
    canny_high: float = Field(default=0.25, gt=0.0, le=1.0)
    var_window: int = Field(default=11, ge=3)
    edge_weight: float = Field(default=0.5, ge=0.0, le=1.0)
    tau_high: float = Field(default=0.60, ge=0.0, le=1.0)
    tau_med: float = Field(default=0.35, ge=0.0, le=1.0)
    tau_low: float = Field(default=0.15, ge=0.0, le=1.0)

    budget: int = Field(default=784, ge=1)
    layers: int = Field(default=2, ge=1)
    q_heads: int = Field(default=8, ge=1)
    kv_heads: int = Field(default=2, ge=1)
    head_dim: int = Field(default=16, ge=1)
    seed: int = 0


class FrameRecordModel(BaseModel):
    frame_idx: int
    verdict: str | None
    redundant_fraction: float | None
    tiers: dict[str, int] | None
    cumulative_skipped: int | None
    cumulative_pruned: int | None
    ms: dict[str, float]


class MethodSummaryModel(BaseModel):
    baseline_bytes: int
    actual_bytes: int
    metadata_bytes: int
    compression_ratio: float
    compression_ratio_payload_only: float
    tier_percent: dict[str, float]
    wasted_score_computations: int
    ms_per_frame: float


class FidelityModel(BaseModel):
    max_abs_err: float
    mean_abs_err: float
    cosine: float


class SeriesModel(BaseModel):
    cumulative_skipped: list[int]
    cumulative_pruned: list[int]


class RunReportModel(BaseModel):
    config: dict
    frames: list[FrameRecordModel]
    methods: dict[str, MethodSummaryModel]
    fidelity: dict[str, FidelityModel]
    series: SeriesModel


class HealthModel(BaseModel):
    status: str
    version: str
