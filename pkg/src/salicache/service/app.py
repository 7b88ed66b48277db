"""FastAPI service wrapping the comparison harness.

POST /run executes a full comparison and returns the report as JSON. Error
detail payloads carry a ``kind`` field ("config" or "io") so thin clients can
map failures onto exit codes without parsing messages.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..attention import AttentionConfig
from ..baselines import BudgetConfig
from ..errors import ConfigError, FileFormatError, InvariantViolation
from ..harness import RunConfig, load_frames, run_comparison
from ..saliency import SaliencyConfig
from ..temporal import TemporalConfig
from .schemas import HealthModel, RunReportModel, RunRequest

app = FastAPI(title="salicache", version=__version__)


def request_to_config(request: RunRequest) -> RunConfig:
    try:
        return RunConfig(
            manifest_path=request.manifest,
            scenario=request.synthetic,
            frame_count=request.frames_count,
            width=request.width,
            height=request.height,
            patch_size=request.patch_size,
            temporal=TemporalConfig(
                diff_threshold=request.tau_t,
                redundancy_threshold=request.theta_r,
            ),
            saliency=SaliencyConfig(
                gaussian_sigma=request.sigma,
                canny_low=request.canny_low,
                canny_high=request.canny_high,
                variance_window=request.var_window,
                edge_weight=request.edge_weight,
                variance_weight=1.0 - request.edge_weight,
                tier_high=request.tau_high,
                tier_med=request.tau_med,
                tier_low=request.tau_low,
            ),
            attention=AttentionConfig(
                n_layers=request.layers,
                n_q_heads=request.q_heads,
                n_kv_heads=request.kv_heads,
                head_dim=request.head_dim,
                seed=request.seed,
            ),
            budget=BudgetConfig(budget=request.budget),
            methods=tuple(request.methods),
        )
    except (ConfigError, ValueError) as exc:
        raise HTTPException(status_code=400, detail={"kind": "config", "message": str(exc)})


def execute_run(request: RunRequest) -> dict:
    """Shared by the endpoint and the in-process CLI client."""
    config = request_to_config(request)
    try:
        frames = load_frames(config)
    except (FileNotFoundError, FileFormatError, OSError) as exc:
        raise HTTPException(status_code=400, detail={"kind": "io", "message": str(exc)})
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail={"kind": "config", "message": str(exc)})
    try:
        return run_comparison(frames, config)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail={"kind": "config", "message": str(exc)})
    except InvariantViolation as exc:
        raise HTTPException(status_code=500, detail={"kind": "internal", "message": str(exc)})


@app.get("/health", response_model=HealthModel)
def health() -> HealthModel:
    return HealthModel(status="ok", version=__version__)


@app.post("/run", response_model=RunReportModel)
def run(request: RunRequest) -> dict:
    return execute_run(request)
