"""Tier codec round trips, rounding behavior and byte accounting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from salicache.quant import (
    dequantize_int4,
    dequantize_int8,
    from_half,
    metadata_bytes,
    payload_bytes,
    quantize_int4,
    quantize_int8,
    to_half,
)
from salicache.quant import _unpack_nibbles

finite_blocks = hnp.arrays(
    dtype=np.float32,
    shape=st.integers(min_value=1, max_value=64),
    elements=st.floats(min_value=-10, max_value=10, width=32),
)


class TestInt8:
    def test_hand_example(self):
        block = quantize_int8([1.0, -2.0, 0.5])
        assert block.scale == pytest.approx(2 / 127, rel=1e-12)
        # 63.5 rounds half-to-even up to 64
        assert block.values.tolist() == [64, -127, 32]
        np.testing.assert_allclose(
            dequantize_int8(block), [1.007874, -2.0, 0.503937], atol=1e-6
        )

    def test_all_zero_block(self):
        block = quantize_int8([0.0, 0.0, 0.0])
        assert block.scale == 0.0
        assert block.values.tolist() == [0, 0, 0]
        assert dequantize_int8(block).tolist() == [0.0, 0.0, 0.0]

    def test_single_extremum_exact(self):
        block = quantize_int8([3.0])
        assert block.values.tolist() == [127]
        assert dequantize_int8(block)[0] == np.float32(3.0)

    def test_rejects_nan_inf(self):
        with pytest.raises(ValueError):
            quantize_int8([1.0, np.nan])
        with pytest.raises(ValueError):
            quantize_int8([np.inf])
        with pytest.raises(ValueError):
            quantize_int8([])

    @settings(max_examples=300)
    @given(finite_blocks)
    def test_round_trip_bound(self, block):
        q = quantize_int8(block)
        err = np.abs(block - dequantize_int8(q))
        assert np.all(err <= q.scale / 2 + 1e-6)
        assert np.all(np.abs(q.values.astype(int)) <= 127)

    @settings(max_examples=200)
    @given(finite_blocks)
    def test_idempotent_codes(self, block):
        q = quantize_int8(block)
        again = quantize_int8(dequantize_int8(q))
        assert np.array_equal(q.values, again.values)


class TestInt4:
    def test_hand_example(self):
        block = quantize_int4([0.0, 1.0, 2.0, 3.0])
        assert block.offset == 0.0
        assert block.scale == pytest.approx(0.2, rel=1e-12)
        assert _unpack_nibbles(block.packed, 4).tolist() == [0, 5, 10, 15]
        assert dequantize_int4(block).tolist() == [0.0, 1.0, 2.0, 3.0]

    def test_constant_block(self):
        block = quantize_int4([-1.0, -1.0])
        assert block.scale == 0.0
        assert block.offset == -1.0
        assert dequantize_int4(block).tolist() == [-1.0, -1.0]

    def test_endpoint_codes(self):
        block = quantize_int4([-2.0, 1.0])
        assert _unpack_nibbles(block.packed, 2).tolist() == [0, 15]
        assert dequantize_int4(block).tolist() == [-2.0, 1.0]

    def test_nibble_packing_odd_and_even(self):
        odd = quantize_int4([0.0, 7.5, 15.0])
        assert len(odd.packed) == 2
        assert odd.packed[1] >> 4 == 0  # final high nibble zero
        even = quantize_int4([0.0, 5.0, 10.0, 15.0])
        assert len(even.packed) == 2
        np.testing.assert_array_equal(
            _unpack_nibbles(even.packed, 4), [0, 5, 10, 15]
        )

    @settings(max_examples=300)
    @given(finite_blocks)
    def test_round_trip_bound_and_exact_endpoints(self, block):
        q = quantize_int4(block)
        decoded = dequantize_int4(q)
        assert np.all(np.abs(block - decoded) <= q.scale / 2 + 1e-6)
        assert decoded[np.argmin(block)] == block.min()
        assert decoded[np.argmax(block)] == block.max()

    @settings(max_examples=200)
    @given(finite_blocks)
    def test_idempotent_codes(self, block):
        q = quantize_int4(block)
        again = quantize_int4(dequantize_int4(q))
        assert q.packed == again.packed


class TestHalf:
    def test_exact_one(self):
        assert from_half(to_half([1.0]))[0] == np.float32(1.0)

    def test_tenth_rounds_to_nearest_half(self):
        assert float(to_half([0.1]).values[0]) == 0.0999755859375

    def test_overflow_is_error(self):
        with pytest.raises(OverflowError, match="half overflow"):
            to_half([65520.0])
        # binary16 max is fine
        assert float(to_half([65504.0]).values[0]) == 65504.0

    @given(st.floats(min_value=-100.0, max_value=100.0, width=32))
    def test_relative_error_bound(self, x):
        back = float(from_half(to_half([x]))[0])
        if abs(x) > 1e-4:  # normal range
            assert abs(back - x) <= abs(x) * 2**-11


class TestByteAccounting:
    @pytest.mark.parametrize(
        "tier,n,expect_payload,expect_meta",
        [
            ("fp16", 32, 64, 0),
            ("int8", 32, 32, 4),
            ("int4", 32, 16, 8),
            ("int4", 33, 17, 8),
            ("prune", 32, 0, 0),
            ("reused", 32, 0, 0),
        ],
    )
    def test_bytes_per_block(self, tier, n, expect_payload, expect_meta):
        assert payload_bytes(tier, n) == expect_payload
        assert metadata_bytes(tier) == expect_meta

    def test_unknown_tier(self):
        with pytest.raises(ValueError):
            payload_bytes("int2", 8)
