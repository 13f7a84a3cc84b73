"""Noise path contracts: determinism, shift laws, distribution."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.random import Generator, Philox
from scipy.special import ndtri as scipy_ndtri
from scipy.stats import kstest

from rpsde.errors import InvalidSpecError
from rpsde.noise import GridSpec, NoisePath, ensemble, ensemble_seeds
from rpsde.philox import _philox_block, _ndtri, U64, derive_seed

GRID = GridSpec(dt=0.01, steps_per_period=628)


def path(seed=7, dim=1, grid=GRID):
    return NoisePath(seed=seed, dim=dim, grid=grid)


class TestEngine:
    def test_philox_matches_numpy_reference(self):
        # our block b equals numpy's Philox at counter b-1 (numpy pre-increments);
        # word indices keep blocks far below one 64-bit limb by construction
        for key, block in [(0, 1), (123456789, 99), (2**64 - 1, 2**57 + 7)]:
            prev = (block - 1) % (1 << 256)
            limbs = np.array([(prev >> (64 * i)) & (2**64 - 1) for i in range(4)], dtype=np.uint64)
            ref = Generator(Philox(key=key, counter=limbs)).integers(
                0, 2**64, size=4, dtype=np.uint64
            )
            mine = _philox_block(
                U64(block & (2**64 - 1)), U64(key & (2**64 - 1)), U64(key >> 64)
            )
            assert np.array_equal(np.array(mine, dtype=np.uint64), ref)

    def test_ndtri_matches_scipy(self):
        u = np.concatenate(
            [np.linspace(1e-12, 1 - 1e-12, 4001), [1e-300, 0.074, 0.5, 0.926, 1 - 1e-16]]
        )
        ours = np.array([_ndtri.py_func(v) for v in u])
        ref = scipy_ndtri(u)
        assert np.max(np.abs(ours - ref) / np.maximum(np.abs(ref), 1.0)) < 5e-15


class TestGridSpec:
    def test_validation(self):
        with pytest.raises(InvalidSpecError):
            GridSpec(dt=0.0, steps_per_period=10)
        with pytest.raises(InvalidSpecError):
            GridSpec(dt=0.1, steps_per_period=0)

    def test_for_period(self):
        g = GridSpec.for_period(2 * np.pi, 1e-3)
        assert g.steps_per_period == 6283
        assert g.period == pytest.approx(2 * np.pi, abs=1e-12)

    def test_index_alignment(self):
        g = GridSpec.for_period(1.0, 1e-4)
        assert g.index_of(1.0) == 10000
        assert g.index_of(-0.5) == -5000
        from rpsde.errors import AlignmentError

        with pytest.raises(AlignmentError):
            g.index_of(0.500033)


class TestIncrements:
    def test_repeat_bit_identical(self):
        p = path()
        a = p.increment(12)
        b = p.increment(12)
        assert np.array_equal(a, b)

    def test_bulk_matches_singles(self):
        p = path(dim=3)
        bulk = p.increments(-5, 6)
        singles = np.vstack([p.increment(k) for k in range(-5, 6)])
        assert np.array_equal(bulk, singles)

    def test_backward_extension_stable(self):
        p = path()
        before = p.increment(0)
        p.increment(-(10**6))
        assert np.array_equal(p.increment(0), before)

    def test_variance_matches_design(self):
        # sample variance of 1e6 increments ~ dt within 3 standard errors
        g = GridSpec(dt=0.01, steps_per_period=100)
        v = NoisePath(seed=2, dim=1, grid=g).increments(0, 10**6)[:, 0].var()
        se = 0.01 * np.sqrt(2 / 1e6)
        assert abs(v - 0.01) < 3 * se

    def test_kolmogorov_smirnov(self):
        # 1%-level check on a fixed realization
        g = GridSpec(dt=0.25, steps_per_period=8)
        z = NoisePath(seed=2, dim=1, grid=g).increments(0, 10**5)[:, 0] / 0.5
        stat = kstest(z, "norm").statistic
        assert stat < 1.63 / np.sqrt(10**5)


class TestShift:
    def test_zero_shift_identity(self):
        p = path()
        assert np.array_equal(p.shift(0).increments(0, 50), p.increments(0, 50))

    @given(st.integers(-500, 500), st.integers(-500, 500), st.integers(-200, 200))
    @settings(max_examples=40, deadline=None)
    def test_shift_group_law(self, a, b, k):
        p = path(seed=11)
        assert np.array_equal(
            p.shift(a).shift(b).increment(k), p.shift(a + b).increment(k)
        )
        assert np.array_equal(p.shift(a).increment(k), p.increment(k + a))

    def test_shift_round_trip(self):
        p = path()
        q = p.shift(3).shift(-3)
        assert np.array_equal(q.increments(-10, 10), p.increments(-10, 10))

    def test_period_shift_is_reindexing(self):
        p = path()
        n = GRID.steps_per_period
        for k in (-7, 0, 13):
            assert np.array_equal(p.shift(n).increment(k), p.increment(k + n))


class TestEvaluate:
    def test_zero_at_origin(self):
        assert np.array_equal(path().evaluate(0), np.zeros(1))

    def test_forward_sum(self):
        p = path()
        assert np.array_equal(p.evaluate(2), p.increment(0) + p.increment(1))

    def test_backward_sum(self):
        p = path()
        assert np.array_equal(p.evaluate(-1), -p.increment(-1))

    def test_additivity_under_shift(self):
        p = path(seed=23)
        for a, b in [(100, 50), (-300, 420), (9999, -1234)]:
            lhs = p.evaluate(a + b) - p.evaluate(a)
            rhs = p.shift(a).evaluate(b)
            assert np.max(np.abs(lhs - rhs)) < 1e-12


class TestEnsemble:
    def test_single(self):
        (p,) = ensemble(42, 1, 1, GRID)
        assert p.seed == derive_seed(42, 0)

    def test_empty_rejected(self):
        with pytest.raises(InvalidSpecError):
            ensemble(42, 0, 1, GRID)

    def test_no_seed_collisions_to_1e6(self):
        seeds = ensemble_seeds(42, 10**6)
        assert np.unique(seeds).size == 10**6

    def test_vectorized_matches_scalar_derivation(self):
        seeds = ensemble_seeds(909, 64)
        assert all(int(seeds[i]) == derive_seed(909, i) for i in range(64))

    def test_replicas_independent_of_count(self):
        a = ensemble(5, 3, 1, GRID)
        b = ensemble(5, 8, 1, GRID)
        for i in range(3):
            assert np.array_equal(a[i].increments(0, 20), b[i].increments(0, 20))
