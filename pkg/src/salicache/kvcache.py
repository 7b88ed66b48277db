"""Tier-tagged per-frame, per-patch K/V storage with whole-frame reuse handles.

Frames are committed in order and immutable afterwards. A redundant frame
stores a single handle to the most recent spatially-processed frame (handle
chains collapse at insert, so resolution depth is always one). Reads
dequantize just-in-time; pruned patches read back as absent. The memory
report compares modeled bytes against a baseline cache that stores every
logical token (reused aliases included) at two bytes per element.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quant
from .saliency import Tier

# a whole-frame reuse handle is charged this many metadata bytes
REUSE_HANDLE_BYTES = 8


@dataclass(frozen=True)
class CacheShape:
    """Geometry of the cached K/V vectors."""

    n_layers: int
    n_kv_heads: int
    head_dim: int

    def __post_init__(self):
        if self.n_layers < 1 or self.n_kv_heads < 1 or self.head_dim < 1:
            raise ValueError("cache shape fields must be positive")

    @property
    def d_kv(self) -> int:
        return self.n_kv_heads * self.head_dim

    def fp16_bytes_per_token(self) -> int:
        # K and V vectors, every layer, two bytes per element
        return 2 * self.n_layers * self.d_kv * 2


@dataclass(frozen=True)
class MemoryReport:
    logical_tokens: int
    baseline_bytes: int
    actual_payload_bytes: int
    metadata_bytes: int
    compression_ratio: float
    tier_histogram: dict[str, int]

    @property
    def payload_only_ratio(self) -> float:
        """Compression with quantization/handle metadata excluded."""
        if self.baseline_bytes == 0:
            return 1.0
        return self.baseline_bytes / max(self.actual_payload_bytes, 1)


@dataclass
class _StoredPatch:
    tier: Tier
    k_blocks: list
    v_blocks: list


@dataclass
class _StoredFrame:
    patches: list  # _StoredPatch | None (None = pruned)


@dataclass
class _ReusedFrame:
    source: int


def _encode(vector: np.ndarray, tier: Tier):
    if tier == Tier.FP16:
        return quant.to_half(vector)
    if tier == Tier.INT8:
        return quant.quantize_int8(vector)
    if tier == Tier.INT4:
        return quant.quantize_int4(vector)
    raise ValueError(f"no payload codec for tier {tier}")


def _decode(block) -> np.ndarray:
    if isinstance(block, quant.HalfBlock):
        return quant.from_half(block)
    if isinstance(block, quant.QuantBlockInt8):
        return quant.dequantize_int8(block)
    return quant.dequantize_int4(block)


class KvCache:
    """Mixed-precision KV store keyed by (frame, patch, layer).

    Single writer, frames committed with strictly increasing indices; reads
    are valid for any committed frame and reproduce bits exactly.
    """

    def __init__(self, shape: CacheShape):
        self.shape = shape
        self._frames: dict[int, _StoredFrame | _ReusedFrame] = {}
        self._patch_count: int | None = None
        self._last_frame: int = -1

    @property
    def patch_count(self) -> int:
        if self._patch_count is None:
            raise ValueError("cache is empty")
        return self._patch_count

    @property
    def frame_indices(self) -> list[int]:
        return sorted(self._frames)

    def _check_frame_index(self, frame_idx: int) -> None:
        if frame_idx in self._frames:
            raise ValueError(f"duplicate frame {frame_idx}")
        if frame_idx <= self._last_frame:
            raise ValueError(
                f"out-of-order frame {frame_idx}: last committed was {self._last_frame}"
            )

    def store_frame(
        self,
        frame_idx: int,
        decisions: list[Tier],
        keys: np.ndarray,
        values: np.ndarray,
    ) -> None:
        """Commit one spatially-processed frame.

        ``keys`` and ``values`` have shape (patch_count, n_layers, d_kv) in
        float32. Patches marked PRUNE store no payload.
        """
        self._check_frame_index(frame_idx)
        n_patches = len(decisions)
        expected = (n_patches, self.shape.n_layers, self.shape.d_kv)
        keys = np.asarray(keys, dtype=np.float32)
        values = np.asarray(values, dtype=np.float32)
        if keys.shape != expected or values.shape != expected:
            raise ValueError(
                f"K/V shape mismatch: got {keys.shape} and {values.shape}, expected {expected}"
            )
        if self._patch_count is None:
            self._patch_count = n_patches
        elif n_patches != self._patch_count:
            raise ValueError(
                f"patch count {n_patches} does not match cache patch count {self._patch_count}"
            )
        patches: list[_StoredPatch | None] = []
        for i, tier in enumerate(decisions):
            if tier == Tier.REUSED:
                raise ValueError("REUSED is a store-level marker, not a per-patch decision")
            if tier == Tier.PRUNE:
                patches.append(None)
                continue
            k_blocks = [_encode(keys[i, layer], tier) for layer in range(self.shape.n_layers)]
            v_blocks = [_encode(values[i, layer], tier) for layer in range(self.shape.n_layers)]
            patches.append(_StoredPatch(tier=tier, k_blocks=k_blocks, v_blocks=v_blocks))
        self._frames[frame_idx] = _StoredFrame(patches=patches)
        self._last_frame = frame_idx

    def store_reused_frame(self, frame_idx: int, source_frame_idx: int) -> None:
        """Commit a whole-frame reuse handle; chains collapse to the stored root."""
        self._check_frame_index(frame_idx)
        if source_frame_idx >= frame_idx:
            raise ValueError(
                f"reuse source {source_frame_idx} must precede frame {frame_idx}"
            )
        source = self._frames.get(source_frame_idx)
        if source is None:
            raise ValueError(f"reuse of uncommitted frame {source_frame_idx}")
        root = source.source if isinstance(source, _ReusedFrame) else source_frame_idx
        self._frames[frame_idx] = _ReusedFrame(source=root)
        self._last_frame = frame_idx

    def _resolve(self, frame_idx: int) -> _StoredFrame:
        entry = self._frames.get(frame_idx)
        if entry is None:
            raise KeyError(f"unknown frame {frame_idx}")
        if isinstance(entry, _ReusedFrame):
            entry = self._frames[entry.source]
        return entry

    def fetch(
        self, frame_idx: int, patch_idx: int, layer: int
    ) -> tuple[np.ndarray, np.ndarray] | None:
        """Dequantized (K, V) float32 vectors, or None for a pruned patch."""
        frame = self._resolve(frame_idx)
        if not 0 <= patch_idx < len(frame.patches):
            raise KeyError(f"unknown patch {patch_idx} in frame {frame_idx}")
        if not 0 <= layer < self.shape.n_layers:
            raise KeyError(f"unknown layer {layer}")
        patch = frame.patches[patch_idx]
        if patch is None:
            return None
        return _decode(patch.k_blocks[layer]), _decode(patch.v_blocks[layer])

    def tier_of(self, frame_idx: int, patch_idx: int) -> Tier:
        """Effective tier of a patch; a reused frame's patches all report REUSED."""
        entry = self._frames.get(frame_idx)
        if entry is None:
            raise KeyError(f"unknown frame {frame_idx}")
        if isinstance(entry, _ReusedFrame):
            return Tier.REUSED
        patch = entry.patches[patch_idx]
        return Tier.PRUNE if patch is None else patch.tier

    def live_entries(self, layer: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All non-pruned tokens at a layer: (token_ids, K, V) with JIT dequantization.

        Token id is frame_idx * patch_count + patch_idx; reused frames alias
        their root frame's payload under their own token ids.
        """
        ids: list[int] = []
        k_rows: list[np.ndarray] = []
        v_rows: list[np.ndarray] = []
        for frame_idx in sorted(self._frames):
            frame = self._resolve(frame_idx)
            for patch_idx, patch in enumerate(frame.patches):
                if patch is None:
                    continue
                ids.append(frame_idx * self.patch_count + patch_idx)
                k_rows.append(_decode(patch.k_blocks[layer]))
                v_rows.append(_decode(patch.v_blocks[layer]))
        if not ids:
            return (
                np.empty(0, dtype=np.int64),
                np.empty((0, self.shape.d_kv), dtype=np.float32),
                np.empty((0, self.shape.d_kv), dtype=np.float32),
            )
        return np.asarray(ids, dtype=np.int64), np.stack(k_rows), np.stack(v_rows)

    def memory_report(self) -> MemoryReport:
        histogram = {t.value: 0 for t in (Tier.REUSED, Tier.PRUNE, Tier.INT4, Tier.INT8, Tier.FP16)}
        payload = 0
        metadata = 0
        logical_tokens = 0
        for entry in self._frames.values():
            if isinstance(entry, _ReusedFrame):
                histogram[Tier.REUSED.value] += self.patch_count
                logical_tokens += self.patch_count
                metadata += REUSE_HANDLE_BYTES
                continue
            logical_tokens += len(entry.patches)
            for patch in entry.patches:
                if patch is None:
                    histogram[Tier.PRUNE.value] += 1
                    continue
                tier = patch.tier.value
                histogram[tier] += 1
                # one K block and one V block per layer
                n_blocks = 2 * self.shape.n_layers
                payload += n_blocks * quant.payload_bytes(tier, self.shape.d_kv)
                metadata += n_blocks * quant.metadata_bytes(tier)
        baseline = logical_tokens * self.shape.fp16_bytes_per_token()
        stored = payload + metadata
        # empty cache reports 1.0 by convention; a fully-pruned cache floors
        # the divisor at one byte to keep the ratio finite and JSON-safe
        ratio = 1.0 if baseline == 0 else baseline / max(stored, 1)
        return MemoryReport(
            logical_tokens=logical_tokens,
            baseline_bytes=baseline,
            actual_payload_bytes=payload,
            metadata_bytes=metadata,
            compression_ratio=ratio,
            tier_histogram=histogram,
        )
