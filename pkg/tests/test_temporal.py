"""Patch deltas and the frame-level redundancy decision."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from salicache.frames import Frame, make_grid
from salicache.temporal import TemporalConfig, frame_redundancy, patch_deltas


def _frame(pixels):
    pixels = np.asarray(pixels, dtype=np.uint8)
    return Frame(pixels.shape[1], pixels.shape[0], pixels)


def _single_patch_pair(delta_r=51):
    base = np.full((16, 16, 3), 100, dtype=np.uint8)
    changed = base.copy()
    changed[3, 7, 0] += delta_r
    return _frame(base), _frame(changed)


class TestPatchDeltas:
    def test_identical_frames_zero(self):
        frame = _frame(np.random.default_rng(0).integers(0, 256, (32, 32, 3)))
        grid = make_grid(frame, 16)
        assert np.all(patch_deltas(frame, frame, grid) == 0.0)

    def test_black_to_white_is_one(self):
        black = _frame(np.zeros((32, 32, 3)))
        white = _frame(np.full((32, 32, 3), 255))
        grid = make_grid(black, 16)
        np.testing.assert_allclose(patch_deltas(black, white, grid), 1.0)

    def test_single_pixel_change_hand_value(self):
        # one channel of one pixel moves by 51/255 = 0.2 inside a 16x16 patch:
        # rms = sqrt(0.2^2 / 768) ~= 0.007217
        prev, curr = _single_patch_pair()
        grid = make_grid(prev, 16)
        expected = np.sqrt(0.2**2 / (3 * 16 * 16))
        np.testing.assert_allclose(patch_deltas(prev, curr, grid), [expected], rtol=1e-12)
        assert abs(expected - 0.007217) < 5e-7

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        a = _frame(rng.integers(0, 256, (32, 48, 3)))
        b = _frame(rng.integers(0, 256, (32, 48, 3)))
        grid = make_grid(a, 16)
        np.testing.assert_array_equal(patch_deltas(a, b, grid), patch_deltas(b, a, grid))

    def test_scale_monotonicity(self):
        base = np.full((16, 16, 3), 120, dtype=np.uint8)
        small = base.copy()
        small[::2, ::2] += 10
        large = base.copy()
        large[::2, ::2] += 30  # same pixels, 3x the difference
        grid = make_grid(_frame(base), 16)
        d_small = patch_deltas(_frame(base), _frame(small), grid)
        d_large = patch_deltas(_frame(base), _frame(large), grid)
        assert np.all(d_large >= d_small)

    def test_dimension_mismatch(self):
        a = _frame(np.zeros((16, 16, 3)))
        b = _frame(np.zeros((16, 32, 3)))
        with pytest.raises(ValueError, match="dimension mismatch"):
            patch_deltas(a, b, make_grid(a, 16))


class TestFrameRedundancy:
    def test_hand_counted_fraction(self):
        report = frame_redundancy(
            np.array([0.0, 0.1, 0.5]), TemporalConfig(diff_threshold=0.2, redundancy_threshold=0.9)
        )
        assert report.redundant_fraction == pytest.approx(2 / 3)
        assert report.verdict == "novel"

    def test_all_zero_deltas_redundant(self):
        report = frame_redundancy(
            np.zeros(7), TemporalConfig(diff_threshold=0.01, redundancy_threshold=0.99)
        )
        assert report.redundant_fraction == 1.0
        assert report.is_redundant

    def test_boundary_strictness(self):
        # deltas exactly at the threshold do not count as redundant
        report = frame_redundancy(
            np.array([0.3, 0.3]), TemporalConfig(diff_threshold=0.3, redundancy_threshold=0.5)
        )
        assert report.redundant_fraction == 0.0
        assert report.verdict == "novel"

    def test_theta_boundary_strictness(self):
        config = TemporalConfig(diff_threshold=0.5, redundancy_threshold=0.5)
        report = frame_redundancy(np.array([0.0, 0.0, 1.0, 1.0]), config)
        assert report.redundant_fraction == 0.5
        assert report.verdict == "novel"  # strictly greater required

    def test_empty_deltas(self):
        with pytest.raises(ValueError, match="empty"):
            frame_redundancy(np.array([]), TemporalConfig())

    @given(
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=64),
        st.floats(min_value=0.0, max_value=1.0),
    )
    def test_fraction_permutation_invariant(self, deltas, tau):
        config = TemporalConfig(diff_threshold=tau, redundancy_threshold=0.5)
        forward = frame_redundancy(np.array(deltas), config)
        backward = frame_redundancy(np.array(deltas[::-1]), config)
        assert forward.redundant_fraction == backward.redundant_fraction
        assert forward.verdict == backward.verdict

    def test_config_validation(self):
        from salicache.errors import ConfigError

        with pytest.raises(ConfigError):
            TemporalConfig(diff_threshold=-0.1)
        with pytest.raises(ConfigError):
            TemporalConfig(redundancy_threshold=1.5)
