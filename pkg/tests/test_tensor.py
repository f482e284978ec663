import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import rollwin as rw


def f32(x):
    return np.asarray(x, dtype=np.float32)


class TestMatmul:
    def test_identity_left(self):
        b = f32([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        assert np.array_equal(rw.matmul(np.eye(2, dtype=np.float32), b), b)

    def test_hand_product(self):
        a = f32([[1, 2], [3, 4]])
        b = f32([[5, 6], [7, 8]])
        assert np.array_equal(rw.matmul(a, b), f32([[19, 22], [43, 50]]))

    def test_zero_annihilates(self):
        a = np.zeros((3, 4), dtype=np.float32)
        b = f32(np.arange(20).reshape(4, 5))
        assert np.array_equal(rw.matmul(a, b), np.zeros((3, 5), dtype=np.float32))

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 3\)"):
            rw.matmul(np.ones((2, 3), np.float32), np.ones((2, 3), np.float32))

    def test_against_naive_triple_loop(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((17, 13), dtype=np.float32)
        b = rng.standard_normal((13, 9), dtype=np.float32)
        expected = np.zeros((17, 9))
        for i in range(17):
            for j in range(9):
                acc = 0.0
                for k in range(13):
                    acc += float(a[i, k]) * float(b[k, j])
                expected[i, j] = acc
        assert np.max(np.abs(rw.matmul(a, b) - expected)) <= 1e-5

    def test_block_and_single_row_agree_bitwise(self):
        # The fixed accumulation order makes batching invisible.
        rng = np.random.default_rng(8)
        a = rng.standard_normal((6, 31), dtype=np.float32)
        b = rng.standard_normal((31, 7), dtype=np.float32)
        block = rw.matmul(a, b)
        for i in range(6):
            assert np.array_equal(rw.matmul(a[i : i + 1], b)[0], block[i])


class TestSoftmax:
    def test_uniform_on_constant_row(self):
        out = rw.softmax_stable(f32([2.0, 2.0, 2.0]))
        assert np.allclose(out, [1 / 3, 1 / 3, 1 / 3], atol=1e-6)

    def test_no_overflow_on_large_inputs(self):
        out = rw.softmax_stable(f32([1000.0, 1000.0]))
        assert np.array_equal(out, f32([0.5, 0.5]))

    def test_known_two_point_distribution(self):
        out = rw.softmax_stable(f32([0.0, math.log(3.0)]))
        assert np.allclose(out, [0.25, 0.75], atol=1e-6)

    def test_masked_entries_exactly_zero(self):
        x = f32([[5.0, 1.0, -2.0, 40.0]])
        masked = np.array([[False, True, False, True]])
        out = rw.softmax_stable(x, masked)
        assert out[0, 1] == 0.0 and out[0, 3] == 0.0
        assert abs(out[0].sum() - 1.0) <= 1e-6

    def test_all_masked_row_rejected(self):
        with pytest.raises(ValueError, match="degenerate attention row"):
            rw.softmax_stable(f32([[1.0, 2.0]]), np.array([[True, True]]))

    def test_mask_shape_mismatch(self):
        with pytest.raises(ValueError):
            rw.softmax_stable(f32([1.0, 2.0]), np.array([[True, False]]))

    @given(
        st.lists(st.integers(-512, 512), min_size=1, max_size=12),
        st.integers(-8, 8),
    )
    def test_shift_invariance(self, raw, c):
        # Entries are multiples of 1/64 so x + c is exact in float32 and the
        # invariance holds to the last bit, not just to tolerance.
        x = f32(raw) / np.float32(64.0)
        shifted = x + np.float32(c)
        diff = np.abs(rw.softmax_stable(x) - rw.softmax_stable(shifted))
        assert float(diff.max()) <= 1e-6

    @given(st.lists(st.floats(-20, 20, width=32), min_size=1, max_size=10))
    def test_probability_vector(self, raw):
        out = rw.softmax_stable(f32(raw))
        assert np.all(out >= 0.0) and np.all(out <= 1.0)
        assert abs(float(out.sum()) - 1.0) <= 1e-6


class TestRmsNorm:
    def test_ones_fixed_point(self):
        x = np.ones((3, 5), dtype=np.float32)
        out = rw.rms_norm(x, np.ones(5, dtype=np.float32), eps=1e-12)
        assert np.allclose(out, 1.0, atol=1e-6)

    def test_zero_input_stays_zero(self):
        out = rw.rms_norm(np.zeros(4, dtype=np.float32), np.ones(4, dtype=np.float32))
        assert np.array_equal(out, np.zeros(4, dtype=np.float32))

    def test_symmetric_pair(self):
        out = rw.rms_norm(f32([3.0, -3.0]), np.ones(2, dtype=np.float32), eps=1e-12)
        assert np.allclose(out, [1.0, -1.0], atol=1e-6)

    def test_gain_scales_output(self):
        out = rw.rms_norm(f32([3.0, -3.0]), f32([2.0, 0.5]), eps=1e-12)
        assert np.allclose(out, [2.0, -0.5], atol=1e-6)

    def test_gain_shape_mismatch(self):
        with pytest.raises(ValueError):
            rw.rms_norm(np.ones((2, 4), np.float32), np.ones(3, np.float32))

    def test_eps_must_be_positive(self):
        with pytest.raises(ValueError):
            rw.rms_norm(np.ones(4, np.float32), np.ones(4, np.float32), eps=0.0)


class TestRope:
    def test_position_zero_is_identity(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((3, 16), dtype=np.float32)
        assert np.array_equal(rw.rope_apply(x, 0), x)

    def test_norm_preserved(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((5, 16), dtype=np.float32)
        for position in (1, 7, 500, 31337):
            out = rw.rope_apply(x, position)
            assert np.allclose(
                np.linalg.norm(out, axis=-1), np.linalg.norm(x, axis=-1), atol=1e-5
            )

    def test_per_pair_norm_preserved(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal(8, dtype=np.float32)
        out = rw.rope_apply(x, 97)
        pairs_in = x.reshape(4, 2)
        pairs_out = out.reshape(4, 2)
        assert np.allclose(
            np.linalg.norm(pairs_out, axis=1), np.linalg.norm(pairs_in, axis=1), atol=1e-5
        )

    def test_scores_depend_on_relative_position_only(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            q = rng.standard_normal(16, dtype=np.float32)
            k = rng.standard_normal(16, dtype=np.float32)
            m = int(rng.integers(0, 50))
            n = int(rng.integers(0, m + 1))
            s = int(rng.integers(0, 100))
            base = float(np.dot(rw.rope_apply(q, m), rw.rope_apply(k, n)))
            moved = float(np.dot(rw.rope_apply(q, m + s), rw.rope_apply(k, n + s)))
            assert abs(base - moved) <= 1e-4

    def test_odd_head_dim_rejected(self):
        with pytest.raises(ValueError, match="even"):
            rw.rope_apply(np.ones(7, np.float32), 1)

    def test_negative_position_rejected(self):
        with pytest.raises(ValueError):
            rw.rope_apply(np.ones(8, np.float32), -1)


class TestSiluGate:
    def test_zero_activation_kills_output(self):
        x1 = f32([0.0, 0.0, 2.0])
        x3 = f32([9.0, -4.0, 1.0])
        out = rw.silu_gate(x1, x3)
        assert out[0] == 0.0 and out[1] == 0.0

    def test_saturates_to_identity(self):
        x1 = f32([40.0, 80.0])
        out = rw.silu_gate(x1, np.ones(2, np.float32))
        assert np.allclose(out, x1, atol=1e-5)

    def test_scalar_value(self):
        out = rw.silu_gate(f32([1.0]), f32([2.0]))
        assert np.allclose(out, [2.0 / (1.0 + math.exp(-1.0))], atol=1e-4)

    def test_very_negative_input_underflows_to_zero(self):
        out = rw.silu_gate(f32([-200.0]), f32([5.0]))
        assert np.isfinite(out).all() and abs(float(out[0])) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rw.silu_gate(np.ones(3, np.float32), np.ones(4, np.float32))
