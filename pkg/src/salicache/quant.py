"""Bit-exact storage codecs for the cache tiers.

Three codecs: IEEE binary16 passthrough, symmetric INT8 (scale only, code
range [-127, 127]) and asymmetric INT4 (block minimum as offset, 4-bit codes
nibble-packed two per byte). A quantization block is one K or V vector for one
token at one layer. Rounding is half-to-even everywhere so codes are
reproducible across platforms.

Scales and offsets are carried at float64 precision so that block extrema
reconstruct bit-exactly after the final float32 cast; the memory model still
charges them as 4-byte fields (see metadata_bytes).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _check_finite(block: np.ndarray) -> None:
    if block.size == 0:
        raise ValueError("empty block")
    if not np.all(np.isfinite(block)):
        raise ValueError("NaN or Inf in quantization input")


@dataclass(frozen=True)
class QuantBlockInt8:
    """Symmetric INT8 block: x ~ scale * q with q in [-127, 127]."""

    scale: float
    values: np.ndarray  # int8

    @property
    def element_count(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class QuantBlockInt4:
    """Asymmetric INT4 block: x ~ offset + scale * q with q in [0, 15], nibble-packed.

    The low nibble of each byte holds the even element index; an odd element
    count leaves the final high nibble zero.
    """

    scale: float
    offset: float
    packed: bytes
    element_count: int


@dataclass(frozen=True)
class HalfBlock:
    """IEEE 754 binary16 storage, round-to-nearest-even from float32."""

    values: np.ndarray  # float16

    @property
    def element_count(self) -> int:
        return int(self.values.size)


def quantize_int8(block) -> QuantBlockInt8:
    x = np.asarray(block, dtype=np.float32)
    _check_finite(x)
    x64 = x.astype(np.float64)
    max_abs = float(np.max(np.abs(x64)))
    if max_abs == 0.0:
        return QuantBlockInt8(scale=0.0, values=np.zeros(x.size, dtype=np.int8))
    # codes from the exact ratio x*127/max so mathematically-exact halves
    # (e.g. 63.5) round half-to-even as stated
    codes = np.round(x64 * 127.0 / max_abs)
    codes = np.clip(codes, -127, 127).astype(np.int8)
    return QuantBlockInt8(scale=max_abs / 127.0, values=codes)


def dequantize_int8(block: QuantBlockInt8) -> np.ndarray:
    return (block.values.astype(np.float64) * block.scale).astype(np.float32)


def _pack_nibbles(codes: np.ndarray) -> bytes:
    if codes.size % 2:
        codes = np.concatenate([codes, np.zeros(1, dtype=codes.dtype)])
    pairs = codes.reshape(-1, 2).astype(np.uint8)
    return ((pairs[:, 1] << 4) | pairs[:, 0]).tobytes()


def _unpack_nibbles(packed: bytes, count: int) -> np.ndarray:
    raw = np.frombuffer(packed, dtype=np.uint8)
    codes = np.empty(raw.size * 2, dtype=np.uint8)
    codes[0::2] = raw & 0x0F
    codes[1::2] = raw >> 4
    return codes[:count]


def quantize_int4(block) -> QuantBlockInt4:
    x = np.asarray(block, dtype=np.float32)
    _check_finite(x)
    x64 = x.astype(np.float64)
    lo = float(np.min(x64))
    hi = float(np.max(x64))
    if hi == lo:
        return QuantBlockInt4(
            scale=0.0,
            offset=lo,
            packed=_pack_nibbles(np.zeros(x.size, dtype=np.uint8)),
            element_count=int(x.size),
        )
    codes = np.round((x64 - lo) * 15.0 / (hi - lo))
    codes = np.clip(codes, 0, 15).astype(np.uint8)
    return QuantBlockInt4(
        scale=(hi - lo) / 15.0,
        offset=lo,
        packed=_pack_nibbles(codes),
        element_count=int(x.size),
    )


def dequantize_int4(block: QuantBlockInt4) -> np.ndarray:
    codes = _unpack_nibbles(block.packed, block.element_count).astype(np.float64)
    return (block.offset + block.scale * codes).astype(np.float32)


def to_half(block) -> HalfBlock:
    x = np.asarray(block, dtype=np.float32)
    _check_finite(x)
    with np.errstate(over="ignore"):
        half = x.astype(np.float16)
    if not np.all(np.isfinite(half)):
        raise OverflowError("half overflow: value outside binary16 finite range")
    return HalfBlock(values=half)


def from_half(block: HalfBlock) -> np.ndarray:
    return block.values.astype(np.float32)


def payload_bytes(tier: str, element_count: int) -> int:
    """Stored payload bytes for one block at a given tier (metadata excluded)."""
    if tier == "fp16":
        return 2 * element_count
    if tier == "int8":
        return element_count
    if tier == "int4":
        return (element_count + 1) // 2
    if tier in ("prune", "reused"):
        return 0
    raise ValueError(f"unknown tier {tier!r}")


def metadata_bytes(tier: str) -> int:
    """Per-block metadata bytes: 4-byte scale for INT8, scale + offset for INT4."""
    if tier == "int8":
        return 4
    if tier == "int4":
        return 8
    if tier in ("fp16", "prune", "reused"):
        return 0
    raise ValueError(f"unknown tier {tier!r}")
