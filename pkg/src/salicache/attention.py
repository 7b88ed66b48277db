"""Toy multi-layer grouped-query attention over cached K/V.

A deterministic featurizer (per-patch mean RGB plus a positional term,
expanded through a seeded random projection and L2-normalized) stands in for
a pretrained vision encoder. Per-layer query/key/value maps are fixed-seed
random matrices scaled by 1/sqrt(embed_dim); normalizing embeddings bounds
the logits, so binary16 storage of K/V can never overflow. Pruned tokens are
excluded from the softmax denominator entirely rather than zero-filled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation
from .frames import Frame, PatchGrid

# raw patch features: mean R/G/B plus sin/cos positional terms for row and col
_FEATURE_DIM = 9


@dataclass(frozen=True)
class AttentionConfig:
    n_layers: int = 2
    n_q_heads: int = 8
    n_kv_heads: int = 2
    head_dim: int = 16
    seed: int = 0

    def __post_init__(self):
        if min(self.n_layers, self.n_q_heads, self.n_kv_heads, self.head_dim) < 1:
            raise ValueError("attention config fields must be positive")
        if self.n_q_heads % self.n_kv_heads != 0:
            raise ValueError(
                f"n_q_heads ({self.n_q_heads}) must be divisible by "
                f"n_kv_heads ({self.n_kv_heads})"
            )

    @property
    def embed_dim(self) -> int:
        return self.n_q_heads * self.head_dim

    @property
    def d_kv(self) -> int:
        return self.n_kv_heads * self.head_dim

    def kv_head_for(self, query_head: int) -> int:
        return (query_head * self.n_kv_heads) // self.n_q_heads


class ProjectionSet:
    """Fixed-seed featurizer and per-layer Q/K/V linear maps.

    The same seed always yields bit-identical matrices; drawing order is the
    featurizer first and then q, k, v per layer.
    """

    def __init__(self, config: AttentionConfig):
        self.config = config
        rng = np.random.default_rng([config.seed, 0])
        d = config.embed_dim
        scale = 1.0 / np.sqrt(d)
        self.w_feature = (rng.standard_normal((d, _FEATURE_DIM)) * scale).astype(np.float32)
        self.w_q: list[np.ndarray] = []
        self.w_k: list[np.ndarray] = []
        self.w_v: list[np.ndarray] = []
        for _ in range(config.n_layers):
            self.w_q.append((rng.standard_normal((d, d)) * scale).astype(np.float32))
            self.w_k.append((rng.standard_normal((config.d_kv, d)) * scale).astype(np.float32))
            self.w_v.append((rng.standard_normal((config.d_kv, d)) * scale).astype(np.float32))


@dataclass(frozen=True)
class AttentionResult:
    """Outputs and post-softmax weights for one attention call at one layer."""

    outputs: np.ndarray  # (n_queries, n_q_heads, head_dim)
    weights: np.ndarray  # (n_queries, n_q_heads, n_tokens)
    token_ids: np.ndarray  # (n_tokens,)


class ImportanceLedger:
    """Cumulative post-softmax attention mass per token, summed over heads and layers."""

    def __init__(self):
        self.scores: dict[int, float] = {}
        self.query_count: int = 0

    def accumulate(self, weights: np.ndarray, token_ids: np.ndarray) -> None:
        """Add one query's softmax rows (any number of head/layer rows).

        Every row must sum to 1 within 1e-4; the per-token column sums are
        added to the running scores and the query counter advances by one.
        """
        weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
        if weights.shape[1] != len(token_ids):
            raise ValueError("weights/token_ids length mismatch")
        row_sums = weights.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > 1e-4):
            raise InvariantViolation(
                f"softmax row sums deviate from 1: {row_sums[np.argmax(np.abs(row_sums - 1.0))]}"
            )
        contributions = weights.sum(axis=0)
        for token_id, value in zip(token_ids, contributions):
            key = int(token_id)
            self.scores[key] = self.scores.get(key, 0.0) + float(value)
        self.query_count += 1

    def score(self, token_id: int) -> float:
        return self.scores.get(int(token_id), 0.0)

    def covers(self, token_ids) -> bool:
        return all(int(t) in self.scores for t in token_ids)


def _positional_features(grid: PatchGrid) -> np.ndarray:
    idx = np.arange(grid.patch_count)
    rows = (idx // grid.cols) / grid.rows
    cols = (idx % grid.cols) / grid.cols
    two_pi = 2.0 * np.pi
    return np.stack(
        [rows, cols, np.sin(two_pi * rows), np.cos(two_pi * rows),
         np.sin(two_pi * cols), np.cos(two_pi * cols)],
        axis=1,
    )


def embed_patches(frame: Frame, grid: PatchGrid, projections: ProjectionSet) -> np.ndarray:
    """Per-patch unit-norm embeddings, deterministic for (frame bytes, seed)."""
    p = grid.patch_size
    rgb = frame.as_float().reshape(grid.rows, p, grid.cols, p, 3)
    mean_rgb = rgb.mean(axis=(1, 3)).reshape(-1, 3)
    features = np.concatenate([mean_rgb, _positional_features(grid)], axis=1)
    embeddings = features.astype(np.float32) @ projections.w_feature.T
    norms = np.linalg.norm(embeddings, axis=1, keepdims=True)
    if np.any(norms < 1e-12):
        raise InvariantViolation("degenerate zero-norm patch embedding")
    return (embeddings / norms).astype(np.float32)


def project_kv(
    embeddings: np.ndarray, projections: ProjectionSet
) -> tuple[np.ndarray, np.ndarray]:
    """Embeddings -> (K, V) of shape (n_patches, n_layers, d_kv), float32."""
    cfg = projections.config
    n = embeddings.shape[0]
    keys = np.empty((n, cfg.n_layers, cfg.d_kv), dtype=np.float32)
    values = np.empty((n, cfg.n_layers, cfg.d_kv), dtype=np.float32)
    for layer in range(cfg.n_layers):
        keys[:, layer, :] = embeddings @ projections.w_k[layer].T
        values[:, layer, :] = embeddings @ projections.w_v[layer].T
    return keys, values


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def gqa_attention(
    query_embeddings: np.ndarray,
    store,
    layer: int,
    projections: ProjectionSet,
) -> AttentionResult:
    """Grouped-query attention over all live cached tokens at one layer.

    ``store`` is anything exposing ``live_entries(layer) -> (ids, K, V)``.
    Query head h reads KV head floor(h * n_kv_heads / n_q_heads). Logits are
    scaled by 1/sqrt(head_dim) and softmaxed with max-subtraction.
    """
    cfg = projections.config
    token_ids, keys, values = store.live_entries(layer)
    if len(token_ids) == 0:
        raise ValueError("no attendable tokens: every cached token is pruned")
    queries = np.atleast_2d(np.asarray(query_embeddings, dtype=np.float32))
    n_q = queries.shape[0]
    q = (queries @ projections.w_q[layer].T).reshape(n_q, cfg.n_q_heads, cfg.head_dim)
    k = keys.astype(np.float64).reshape(-1, cfg.n_kv_heads, cfg.head_dim)
    v = values.astype(np.float64).reshape(-1, cfg.n_kv_heads, cfg.head_dim)

    group = np.array([cfg.kv_head_for(h) for h in range(cfg.n_q_heads)])
    # (tokens, n_q_heads, head_dim) views of the grouped K/V
    k_grouped = k[:, group, :]
    v_grouped = v[:, group, :]
    logits = np.einsum("qhd,thd->qht", q.astype(np.float64), k_grouped)
    logits /= np.sqrt(cfg.head_dim)
    weights = _softmax_rows(logits)
    outputs = np.einsum("qht,thd->qhd", weights, v_grouped)
    return AttentionResult(outputs=outputs, weights=weights, token_ids=token_ids)


@dataclass
class FullPrecisionStore:
    """Float32 K/V store with optional eviction; the uncompressed reference.

    Exposes the same ``live_entries`` protocol as KvCache. Used for the
    full-cache baseline and, via ``round_trip_half=True``, for the budgeted
    baselines that keep retained tokens at binary16.
    """

    n_layers: int
    round_trip_half: bool = False
    _keys: dict[int, np.ndarray] = field(default_factory=dict)
    _values: dict[int, np.ndarray] = field(default_factory=dict)

    def add_tokens(self, token_ids, keys: np.ndarray, values: np.ndarray) -> None:
        """keys/values: (n_tokens, n_layers, d_kv) float32."""
        keys = np.asarray(keys, dtype=np.float32)
        values = np.asarray(values, dtype=np.float32)
        if self.round_trip_half:
            keys = keys.astype(np.float16).astype(np.float32)
            values = values.astype(np.float16).astype(np.float32)
        for i, token_id in enumerate(token_ids):
            self._keys[int(token_id)] = keys[i]
            self._values[int(token_id)] = values[i]

    def evict(self, token_ids) -> None:
        for token_id in token_ids:
            self._keys.pop(int(token_id), None)
            self._values.pop(int(token_id), None)

    @property
    def token_ids(self) -> list[int]:
        return sorted(self._keys)

    def live_entries(self, layer: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ids = self.token_ids
        if not ids:
            d_kv = 0
            return (
                np.empty(0, dtype=np.int64),
                np.empty((0, d_kv), dtype=np.float32),
                np.empty((0, d_kv), dtype=np.float32),
            )
        keys = np.stack([self._keys[t][layer] for t in ids])
        values = np.stack([self._values[t][layer] for t in ids])
        return np.asarray(ids, dtype=np.int64), keys, values
