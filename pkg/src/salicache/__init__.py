"""Dual-signal KV-cache compression for video token streams.

Core pipeline stages (frames, temporal, saliency, quant, kvcache, attention,
baselines) are importable directly; the comparison harness lives in
``salicache.harness``, the HTTP service in ``salicache.service`` and the CLI
in ``salicache.cli``.
"""

__version__ = "0.1.0"

from .attention import AttentionConfig, ImportanceLedger, ProjectionSet
from .baselines import BudgetConfig
from .frames import Frame, FrameManifest, PatchGrid, load_frame, load_manifest, make_grid, synth_sequence
from .harness import RunConfig, run_comparison, run_salicache
from .kvcache import CacheShape, KvCache, MemoryReport
from .saliency import SaliencyConfig, Tier
from .temporal import TemporalConfig

__all__ = [
    "__version__",
    "AttentionConfig",
    "BudgetConfig",
    "CacheShape",
    "Frame",
    "FrameManifest",
    "ImportanceLedger",
    "KvCache",
    "MemoryReport",
    "PatchGrid",
    "ProjectionSet",
    "RunConfig",
    "SaliencyConfig",
    "TemporalConfig",
    "Tier",
    "load_frame",
    "load_manifest",
    "make_grid",
    "run_comparison",
    "run_salicache",
    "synth_sequence",
]
