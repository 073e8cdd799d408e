import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from icr.synth import (
    InvalidDims,
    generate_instance,
    mse,
    sparsity_level,
    support_match,
)


class TestGenerateInstance:
    def test_same_seed_bit_identical(self):
        a = generate_instance(10, 6, 3, 0.01, seed=123)
        b = generate_instance(10, 6, 3, 0.01, seed=123)
        assert np.array_equal(a.inst.A, b.inst.A)
        assert np.array_equal(a.inst.y, b.inst.y)
        assert np.array_equal(a.x0, b.x0)

    def test_different_seeds_differ(self):
        for seed in range(100):
            a = generate_instance(6, 4, 2, 0.01, seed=seed)
            b = generate_instance(6, 4, 2, 0.01, seed=seed + 1000)
            assert not np.array_equal(a.inst.A, b.inst.A)

    def test_zero_sparsity(self):
        synth = generate_instance(8, 5, 0, 0.01, seed=1)
        assert np.all(synth.x0 == 0.0)
        # observation is pure noise at the requested level
        assert np.linalg.norm(synth.inst.y) < 1.0

    def test_unit_columns(self):
        synth = generate_instance(20, 7, 4, 0.01, seed=2)
        norms = np.linalg.norm(synth.inst.A, axis=0)
        assert np.allclose(norms, 1.0, atol=1e-12)

    def test_exact_sparsity_and_model(self):
        synth = generate_instance(30, 10, 7, 0.0, seed=3)
        assert np.count_nonzero(synth.x0) == 7
        assert np.allclose(synth.inst.y, synth.inst.A @ synth.x0)

    def test_nonneg_signal_flag(self):
        synth = generate_instance(30, 10, 7, 0.01, seed=4, nonneg_signal=True)
        assert np.all(synth.x0 >= 0.0)
        assert np.count_nonzero(synth.x0) == 7

    def test_invalid_dims(self):
        with pytest.raises(InvalidDims):
            generate_instance(5, 0, 1, 0.01)
        with pytest.raises(InvalidDims):
            generate_instance(5, 3, 6, 0.01)
        with pytest.raises(InvalidDims):
            generate_instance(5, 3, -1, 0.01)

    def test_seed_sequence_accepted(self):
        ss = np.random.SeedSequence(entropy=9, spawn_key=(2,))
        a = generate_instance(6, 4, 2, 0.01, seed=ss)
        b = generate_instance(6, 4, 2, 0.01,
                              seed=np.random.SeedSequence(entropy=9, spawn_key=(2,)))
        assert np.array_equal(a.inst.A, b.inst.A)


class TestMse:
    def test_identical(self):
        x = np.array([1.0, -2.0])
        assert mse(x, x) == 0.0

    def test_hand_value(self):
        assert mse(np.array([1.0, 0.0]), np.zeros(2)) == pytest.approx(0.5)

    @given(arrays(float, 5, elements=st.floats(-100, 100)),
           arrays(float, 5, elements=st.floats(-100, 100)))
    def test_symmetric_nonnegative(self, a, b):
        assert mse(a, b) == pytest.approx(mse(b, a))
        assert mse(a, b) >= 0.0

    def test_zero_iff_equal(self):
        a = np.array([1.0, 2.0])
        assert mse(a, a + 1e-9) > 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mse(np.zeros(2), np.zeros(3))


class TestSupportMatch:
    def test_identical_supports(self):
        x = np.array([1.0, 0.0, -3.0])
        assert support_match(x, x, 1e-6) == 100.0

    def test_disjoint_supports(self):
        x = np.array([1.0, 1.0, 0.0, 0.0])
        r = np.array([0.0, 0.0, 1.0, 1.0])
        assert support_match(x, r, 1e-6) == 0.0

    def test_partial(self):
        x = np.array([1.0, 0.0, 0.0, 0.0])
        r = np.array([1.0, 1.0, 0.0, 0.0])
        assert support_match(x, r, 1e-6) == 75.0

    def test_threshold_semantics(self):
        x = np.array([1e-7, 1.0])
        r = np.array([0.0, 1.0])
        assert support_match(x, r, 1e-6) == 100.0

    def test_over_union_variant(self):
        x = np.array([1.0, 0.0, 0.0, 0.0])
        r = np.array([1.0, 1.0, 0.0, 0.0])
        assert support_match(x, r, 1e-6, over_union=True) == 50.0
        assert support_match(np.zeros(3), np.zeros(3), 1e-6, over_union=True) == 100.0

    @given(arrays(float, 6, elements=st.floats(-10, 10)), st.floats(1e-9, 1.0))
    def test_self_match_always_full(self, x, tau):
        assert support_match(x, x, tau) == 100.0

    def test_tau_must_be_positive(self):
        with pytest.raises(ValueError):
            support_match(np.zeros(2), np.zeros(2), 0.0)


class TestSparsityLevel:
    def test_zero_vector(self):
        assert sparsity_level(np.zeros(4)) == 0

    def test_threshold(self):
        assert sparsity_level(np.array([1.0, 1e-9, -2.0]), 1e-6) == 2

    @given(arrays(float, 8, elements=st.floats(-5, 5)),
           st.floats(1e-6, 1.0), st.floats(1e-6, 1.0))
    def test_monotone_in_tau(self, x, t1, t2):
        lo, hi = min(t1, t2), max(t1, t2)
        assert sparsity_level(x, hi) <= sparsity_level(x, lo)
