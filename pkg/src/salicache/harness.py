"""End-to-end pipeline runs and the four-way method comparison.

For each frame the dual-signal pipeline first checks temporal redundancy
against the immediately preceding input frame (whole-frame cache reuse when
redundant), then assigns per-patch storage tiers from the saliency map and
commits K/V at those tiers. The comparison harness runs the pipeline next to
a full-precision baseline and two budgeted eviction baselines over identical
embeddings and projections, then measures attention-output fidelity against
the baseline with a fixed probe set.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .attention import (
    AttentionConfig,
    FullPrecisionStore,
    ImportanceLedger,
    ProjectionSet,
    embed_patches,
    gqa_attention,
    project_kv,
)
from .baselines import BudgetConfig, EvictionTrace, h2o_step, sliding_window_step
from .errors import ConfigError, InvariantViolation
from .frames import Frame, PatchGrid, load_manifest, load_sequence, make_grid, synth_sequence
from .kvcache import CacheShape, KvCache
from .saliency import SaliencyConfig, Tier, assign_tiers, patch_saliency, saliency_map
from .temporal import TemporalConfig, frame_redundancy, patch_deltas

METHODS = ("baseline", "sliding", "h2o", "salicache")
PROBE_COUNT = 16


@dataclass
class RunConfig:
    """Everything a comparison run needs; output path/format live in the CLI."""

    manifest_path: str | None = None
    scenario: str | None = None
    frame_count: int = 16
    width: int = 64
    height: int = 64
    patch_size: int = 16
    temporal: TemporalConfig = field(default_factory=TemporalConfig)
    saliency: SaliencyConfig = field(default_factory=SaliencyConfig)
    attention: AttentionConfig = field(default_factory=AttentionConfig)
    budget: BudgetConfig = field(default_factory=BudgetConfig)
    methods: tuple[str, ...] = METHODS

    def __post_init__(self):
        if (self.manifest_path is None) == (self.scenario is None):
            raise ConfigError("exactly one of manifest_path or scenario must be set")
        if not self.methods:
            raise ConfigError("at least one method must be selected")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; expected subset of {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("duplicate method names")

    @property
    def cache_shape(self) -> CacheShape:
        return CacheShape(
            n_layers=self.attention.n_layers,
            n_kv_heads=self.attention.n_kv_heads,
            head_dim=self.attention.head_dim,
        )

    def to_dict(self) -> dict:
        return {
            "input": {
                "kind": "manifest" if self.manifest_path else "synthetic",
                "source": self.manifest_path or self.scenario,
                "frame_count": self.frame_count,
                "width": self.width,
                "height": self.height,
            },
            "patch_size": self.patch_size,
            "temporal": {
                "tau_t": self.temporal.diff_threshold,
                "theta_r": self.temporal.redundancy_threshold,
            },
            "saliency": {
                "sigma": self.saliency.gaussian_sigma,
                "canny_low": self.saliency.canny_low,
                "canny_high": self.saliency.canny_high,
                "var_window": self.saliency.variance_window,
                "edge_weight": self.saliency.edge_weight,
                "tau_high": self.saliency.tier_high,
                "tau_med": self.saliency.tier_med,
                "tau_low": self.saliency.tier_low,
            },
            "attention": {
                "layers": self.attention.n_layers,
                "q_heads": self.attention.n_q_heads,
                "kv_heads": self.attention.n_kv_heads,
                "head_dim": self.attention.head_dim,
                "seed": self.attention.seed,
            },
            "budget": self.budget.budget,
            "methods": list(self.methods),
        }


@dataclass
class FrameRecord:
    """Per-frame pipeline decision plus per-method wall-clock timings."""

    frame_idx: int
    verdict: str | None = None
    redundant_fraction: float | None = None
    tiers: dict[str, int] | None = None
    cumulative_skipped: int | None = None
    cumulative_pruned: int | None = None
    ms: dict[str, float] = field(default_factory=dict)


def load_frames(config: RunConfig) -> list[Frame]:
    if config.manifest_path is not None:
        manifest = load_manifest(config.manifest_path)
        if manifest.patch_size != config.patch_size:
            raise ConfigError(
                f"manifest patch size {manifest.patch_size} does not match "
                f"configured patch size {config.patch_size}"
            )
        frames = load_sequence(manifest)
        if not frames:
            raise ConfigError("no frames to process")
        return frames
    return synth_sequence(
        config.scenario,
        config.frame_count,
        (config.width, config.height),
        config.patch_size,
        config.attention.seed,
    )


def _empty_tier_counts() -> dict[str, int]:
    return {t.value: 0 for t in (Tier.REUSED, Tier.PRUNE, Tier.INT4, Tier.INT8, Tier.FP16)}


def run_salicache(
    frames: list[Frame],
    config: RunConfig,
    projections: ProjectionSet | None = None,
    delta_fn=patch_deltas,
) -> tuple[KvCache, list[FrameRecord]]:
    """Run the dual-signal pipeline over a frame sequence.

    The first frame is always processed spatially. Later frames are compared
    against their immediate predecessor (``delta_fn`` is pluggable should a
    different temporal signal be wanted); redundant frames commit a reuse
    handle, novel frames commit tier-tagged K/V.
    """
    if not frames:
        raise ConfigError("no frames to process")
    if projections is None:
        projections = ProjectionSet(config.attention)
    grid = make_grid(frames[0], config.patch_size)
    cache = KvCache(config.cache_shape)
    records: list[FrameRecord] = []
    skipped = 0
    pruned = 0
    for t, frame in enumerate(frames):
        start = time.perf_counter()
        verdict = "novel"
        fraction = 0.0
        tiers = _empty_tier_counts()
        if t > 0:
            deltas = delta_fn(frames[t - 1], frame, grid)
            report = frame_redundancy(deltas, config.temporal)
            verdict = report.verdict
            fraction = report.redundant_fraction
        if verdict == "redundant":
            cache.store_reused_frame(t, t - 1)
            tiers[Tier.REUSED.value] = grid.patch_count
            skipped += grid.patch_count
        else:
            scores = patch_saliency(saliency_map(frame, config.saliency), grid)
            decisions = assign_tiers(scores, config.saliency)
            embeddings = embed_patches(frame, grid, projections)
            keys, values = project_kv(embeddings, projections)
            cache.store_frame(t, decisions, keys, values)
            for decision in decisions:
                tiers[decision.value] += 1
            pruned += tiers[Tier.PRUNE.value]
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        records.append(
            FrameRecord(
                frame_idx=t,
                verdict=verdict,
                redundant_fraction=float(fraction),
                tiers=tiers,
                cumulative_skipped=skipped,
                cumulative_pruned=pruned,
                ms={"salicache": elapsed_ms},
            )
        )
    return cache, records


def _run_baseline(
    frames: list[Frame], config: RunConfig, projections: ProjectionSet, grid: PatchGrid
) -> tuple[FullPrecisionStore, list[float]]:
    store = FullPrecisionStore(n_layers=config.attention.n_layers)
    timings = []
    n_p = grid.patch_count
    for t, frame in enumerate(frames):
        start = time.perf_counter()
        embeddings = embed_patches(frame, grid, projections)
        keys, values = project_kv(embeddings, projections)
        store.add_tokens(range(t * n_p, (t + 1) * n_p), keys, values)
        timings.append((time.perf_counter() - start) * 1000.0)
    return store, timings


def _run_sliding(
    frames: list[Frame], config: RunConfig, projections: ProjectionSet, grid: PatchGrid
) -> tuple[FullPrecisionStore, list[float], EvictionTrace]:
    store = FullPrecisionStore(n_layers=config.attention.n_layers, round_trip_half=True)
    trace = EvictionTrace()
    live: list[int] = []
    timings = []
    n_p = grid.patch_count
    for t, frame in enumerate(frames):
        start = time.perf_counter()
        embeddings = embed_patches(frame, grid, projections)
        keys, values = project_kv(embeddings, projections)
        new_ids = list(range(t * n_p, (t + 1) * n_p))
        store.add_tokens(new_ids, keys, values)
        live, evicted = sliding_window_step(live, new_ids, config.budget.budget)
        store.evict(evicted)
        trace.evicted.extend(evicted)
        timings.append((time.perf_counter() - start) * 1000.0)
    return store, timings, trace


def _run_h2o(
    frames: list[Frame], config: RunConfig, projections: ProjectionSet, grid: PatchGrid
) -> tuple[FullPrecisionStore, list[float], EvictionTrace, ImportanceLedger]:
    store = FullPrecisionStore(n_layers=config.attention.n_layers, round_trip_half=True)
    trace = EvictionTrace()
    ledger = ImportanceLedger()
    live: list[int] = []
    timings = []
    n_p = grid.patch_count
    n_layers = config.attention.n_layers
    for t, frame in enumerate(frames):
        start = time.perf_counter()
        embeddings = embed_patches(frame, grid, projections)
        keys, values = project_kv(embeddings, projections)
        new_ids = list(range(t * n_p, (t + 1) * n_p))
        store.add_tokens(new_ids, keys, values)
        live = sorted(live + new_ids)
        # compute-then-discard: score every live token with one summary query
        # per frame before deciding evictions
        query = embeddings.mean(axis=0)
        query = query / np.linalg.norm(query)
        rows = []
        token_ids = None
        for layer in range(n_layers):
            result = gqa_attention(query, store, layer, projections)
            rows.append(result.weights[0])  # (n_q_heads, n_tokens)
            token_ids = result.token_ids
        ledger.accumulate(np.concatenate(rows, axis=0), token_ids)
        live, evicted = h2o_step(
            ledger, live, config.budget.budget, trace=trace, queries_this_step=1
        )
        store.evict(evicted)
        timings.append((time.perf_counter() - start) * 1000.0)
    return store, timings, trace, ledger


def _probe_queries(config: AttentionConfig) -> np.ndarray:
    """Fixed-seed unit-norm probe embeddings, one bank per layer."""
    rng = np.random.default_rng([config.seed, 1])
    probes = rng.standard_normal((config.n_layers, PROBE_COUNT, config.embed_dim))
    norms = np.linalg.norm(probes, axis=2, keepdims=True)
    return (probes / norms).astype(np.float32)


def _fidelity_metrics(reference: np.ndarray, candidate: np.ndarray) -> dict:
    diff = np.abs(reference - candidate)
    ref_flat = reference.reshape(reference.shape[0], -1)
    cand_flat = candidate.reshape(candidate.shape[0], -1)
    cosines = []
    for a, b in zip(ref_flat, cand_flat):
        denom = np.linalg.norm(a) * np.linalg.norm(b)
        cosines.append(float(a @ b / denom) if denom > 0 else 1.0)
    return {
        "max_abs_err": float(diff.max()),
        "mean_abs_err": float(diff.mean()),
        "cosine": float(np.mean(cosines)),
    }


def run_comparison(frames: list[Frame], config: RunConfig) -> dict:
    """Run every selected method over the frame sequence and assemble the report.

    Identical projections (same seed) feed every method; fidelity compares
    final-layer attention outputs for a fixed probe bank against the
    uncompressed float32 baseline and is reported when `baseline` is selected.
    Wall-clock fields are the only nondeterministic report content.
    """
    if not frames:
        raise ConfigError("no frames to process")
    grid = make_grid(frames[0], config.patch_size)
    for frame in frames[1:]:
        if (frame.width, frame.height) != (frames[0].width, frames[0].height):
            raise ConfigError("frames do not share identical dimensions")
    projections = ProjectionSet(config.attention)
    n_frames = len(frames)
    n_p = grid.patch_count
    total_tokens = n_frames * n_p
    fp16_per_token = config.cache_shape.fp16_bytes_per_token()

    stores: dict[str, object] = {}
    timings: dict[str, list[float]] = {}
    summaries: dict[str, dict] = {}
    pipeline_records: list[FrameRecord] | None = None

    for method in config.methods:
        if method == "baseline":
            store, ms = _run_baseline(frames, config, projections, grid)
            baseline_bytes = total_tokens * fp16_per_token
            summaries[method] = {
                "baseline_bytes": baseline_bytes,
                "actual_bytes": baseline_bytes,
                "metadata_bytes": 0,
                "compression_ratio": 1.0,
                "compression_ratio_payload_only": 1.0,
                "tier_percent": {"fp16": 100.0},
                "wasted_score_computations": 0,
            }
        elif method == "sliding":
            store, ms, trace = _run_sliding(frames, config, projections, grid)
            summaries[method] = _budgeted_summary(store, trace, total_tokens, fp16_per_token)
        elif method == "h2o":
            store, ms, trace, _ = _run_h2o(frames, config, projections, grid)
            summaries[method] = _budgeted_summary(store, trace, total_tokens, fp16_per_token)
        else:  # salicache
            store, pipeline_records = run_salicache(frames, config, projections)
            ms = [record.ms["salicache"] for record in pipeline_records]
            report = store.memory_report()
            total = sum(report.tier_histogram.values())
            summaries[method] = {
                "baseline_bytes": report.baseline_bytes,
                "actual_bytes": report.actual_payload_bytes + report.metadata_bytes,
                "metadata_bytes": report.metadata_bytes,
                "compression_ratio": float(report.compression_ratio),
                "compression_ratio_payload_only": float(report.payload_only_ratio),
                "tier_percent": {
                    tier: 100.0 * count / total for tier, count in report.tier_histogram.items()
                },
                "wasted_score_computations": 0,
            }
            if total != total_tokens:
                raise InvariantViolation(
                    f"tier histogram covers {total} patches, expected {total_tokens}"
                )
        stores[method] = store
        timings[method] = ms
        summaries[method]["ms_per_frame"] = float(np.mean(ms))

    fidelity: dict[str, dict] = {}
    if "baseline" in config.methods:
        probes = _probe_queries(config.attention)
        final_layer = config.attention.n_layers - 1
        reference = gqa_attention(
            probes[final_layer], stores["baseline"], final_layer, projections
        ).outputs
        for method in config.methods:
            candidate = gqa_attention(
                probes[final_layer], stores[method], final_layer, projections
            ).outputs
            fidelity[method] = _fidelity_metrics(reference, candidate)

    frame_records = _merge_frame_records(n_frames, config.methods, timings, pipeline_records)
    series = {
        "cumulative_skipped": [r.cumulative_skipped for r in pipeline_records]
        if pipeline_records
        else [],
        "cumulative_pruned": [r.cumulative_pruned for r in pipeline_records]
        if pipeline_records
        else [],
    }
    report = {
        "config": config.to_dict(),
        "frames": [
            {
                "frame_idx": r.frame_idx,
                "verdict": r.verdict,
                "redundant_fraction": r.redundant_fraction,
                "tiers": r.tiers,
                "cumulative_skipped": r.cumulative_skipped,
                "cumulative_pruned": r.cumulative_pruned,
                "ms": r.ms,
            }
            for r in frame_records
        ],
        "methods": summaries,
        "fidelity": fidelity,
        "series": series,
    }
    _check_report_invariants(report)
    return report


def _budgeted_summary(
    store: FullPrecisionStore, trace: EvictionTrace, total_tokens: int, fp16_per_token: int
) -> dict:
    live = len(store.token_ids)
    baseline_bytes = total_tokens * fp16_per_token
    actual = live * fp16_per_token
    return {
        "baseline_bytes": baseline_bytes,
        "actual_bytes": actual,
        "metadata_bytes": 0,
        "compression_ratio": baseline_bytes / max(actual, 1),
        "compression_ratio_payload_only": baseline_bytes / max(actual, 1),
        "tier_percent": {
            "fp16": 100.0 * live / total_tokens,
            "evicted": 100.0 * len(trace.evicted) / total_tokens,
        },
        "wasted_score_computations": trace.wasted_score_computations,
    }


def _merge_frame_records(
    n_frames: int,
    methods: tuple[str, ...],
    timings: dict[str, list[float]],
    pipeline_records: list[FrameRecord] | None,
) -> list[FrameRecord]:
    records = []
    for t in range(n_frames):
        if pipeline_records is not None:
            record = pipeline_records[t]
        else:
            record = FrameRecord(frame_idx=t)
        record.ms = {method: timings[method][t] for method in methods}
        records.append(record)
    return records


def _check_report_invariants(report: dict) -> None:
    for method, summary in report["methods"].items():
        total = sum(summary["tier_percent"].values())
        if abs(total - 100.0) > 0.1:
            raise InvariantViolation(
                f"tier percentages for {method} sum to {total}, expected 100"
            )
    for name in ("cumulative_skipped", "cumulative_pruned"):
        series = report["series"][name]
        if any(b < a for a, b in zip(series, series[1:])):
            raise InvariantViolation(f"series {name} is not monotone nondecreasing")
