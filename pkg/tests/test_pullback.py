"""Pullback construction: Cauchy decay, limit windows, defining identities."""

import numpy as np
import pytest

from rpsde.errors import InvalidSpecError, NonConvergenceError
from rpsde.models import (
    CubicScalarSpec,
    LinearPeriodicSpec,
    build_cubic_scalar,
    build_linear_periodic,
    build_polynomial_scalar,
)
from rpsde.noise import NoisePath
from rpsde.pullback import (
    initial_point_independence,
    pullback_sequence,
    pullback_values_ensemble,
    random_periodic_path,
    verify_random_periodicity,
)
from rpsde.trig import TrigPoly

CUBIC = build_cubic_scalar(CubicScalarSpec(gamma=0.5, delta=1.0))
CGRID = CUBIC.grid_for(1e-2)
DET_LIN = build_linear_periodic(
    LinearPeriodicSpec(alpha=TrigPoly(1.0), noise_scale=0.0, period=2 * np.pi)
)
DGRID = DET_LIN.grid_for(1e-3)


class TestCauchySequence:
    def test_deterministic_gap_decay_exact(self):
        p = NoisePath(seed=5, dim=1, grid=DGRID)
        _wins, rep = pullback_sequence(DET_LIN, p, 0.0, 1.0, 5)
        # discrete contraction factor per depth is exactly (1 - dt)^steps
        expected_slope = DGRID.steps_per_period * np.log1p(-DGRID.dt)
        assert rep.slope == pytest.approx(expected_slope, abs=1e-9)
        ratios = rep.gaps[1:] / rep.gaps[:-1]
        assert np.allclose(ratios, np.exp(expected_slope), rtol=1e-9)
        assert rep.passed

    def test_cubic_geometric_decay(self):
        for seed in range(8):
            p = NoisePath(seed=seed, dim=1, grid=CGRID)
            _wins, rep = pullback_sequence(CUBIC, p, 0.0, 1.0, 5)
            floor = 10 * np.finfo(float).eps
            for g0, g1 in zip(rep.gaps[:-1], rep.gaps[1:]):
                if g0 > floor and g1 > floor:
                    assert g1 / g0 <= 0.01
            assert rep.passed

    def test_log_gaps_decrease(self):
        for seed in range(10):
            p = NoisePath(seed=seed, dim=1, grid=CGRID)
            _wins, rep = pullback_sequence(CUBIC, p, 0.0, 1.0, 5)
            floor = 10 * np.finfo(float).eps
            usable = rep.gaps[rep.gaps > floor]
            assert np.all(np.diff(np.log(usable)) < 0)

    def test_depth_one_rejected(self):
        p = NoisePath(seed=1, dim=1, grid=CGRID)
        with pytest.raises(InvalidSpecError):
            pullback_sequence(CUBIC, p, 0.0, 1.0, 1)

    def test_noisy_linear_slope_bound(self):
        # window differences decay at e^{-2 pi} per depth with a random O(1)
        # prefactor per gap; the 0.5 slack is calibrated for the fitted slope
        # averaged over seeds (a single 4-point fit carries ~0.5 noise itself)
        lin = build_linear_periodic(
            LinearPeriodicSpec(alpha=TrigPoly(1.0, sin_coeffs=(0.5,)), noise_scale=1.0)
        )
        g = lin.grid_for(1e-2)
        slopes = []
        for seed in range(8):
            p = NoisePath(seed=seed, dim=1, grid=g)
            _, rep = pullback_sequence(lin, p, 0.0, 1.0, 5)
            assert rep.slope < 0.0
            slopes.append(rep.slope)
        assert np.mean(slopes) <= -2 * np.pi + 0.5


class TestRandomPeriodicPath:
    def test_deterministic_limit_is_zero(self):
        p = NoisePath(seed=2, dim=1, grid=DGRID)
        rps = random_periodic_path(DET_LIN, p, 0.0, 1.0, tol=1e-10)
        assert np.max(np.abs(rps.states)) < 1e-10 / (1 - np.exp(-2 * np.pi))
        # closed form depth: gap(n) ~ e^{-2 pi (n-1)}, so expect ceil(log(c/tol)/2pi)+1
        assert rps.n_used <= int(np.ceil(np.log(1.0 / 1e-10) / (2 * np.pi))) + 1

    def test_zero_tolerance_rejected(self):
        p = NoisePath(seed=2, dim=1, grid=CGRID)
        with pytest.raises(InvalidSpecError):
            random_periodic_path(CUBIC, p, 0.0, 1.0, tol=0.0)

    def test_nonconvergence_is_loud(self):
        # pure Brownian motion: windows never settle
        neutral = build_polynomial_scalar(
            {1: TrigPoly(0.0)}, {0: TrigPoly(1.0)}, period=2 * np.pi, name="neutral"
        )
        p = NoisePath(seed=3, dim=1, grid=neutral.grid_for(1e-2))
        with pytest.raises(NonConvergenceError) as err:
            random_periodic_path(neutral, p, 0.0, 0.0, tol=1e-6, n_cap=6)
        assert len(err.value.gaps) == 5

    def test_deeper_rebuild_changes_at_most_last_gap(self):
        p = NoisePath(seed=8, dim=1, grid=CGRID)
        rps = random_periodic_path(CUBIC, p, 0.0, 1.0, tol=1e-5)
        from rpsde.pullback import _window

        deeper = _window(CUBIC, p, rps.k_star, rps.x0, rps.n_used + 1, "euler")
        assert np.max(np.abs(deeper - rps.states)) <= rps.last_gap

    def test_initial_point_independence(self):
        p = NoisePath(seed=4, dim=1, grid=CGRID)
        gap, ok = initial_point_independence(CUBIC, p, 0.0, 1.0, -2.0, tol=1e-6)
        assert ok
        assert gap <= 2e-6


class TestVerification:
    def test_shift_residual_bit_zero(self):
        for seed in (0, 1, 2):
            p = NoisePath(seed=seed, dim=1, grid=CGRID)
            rps = random_periodic_path(CUBIC, p, 0.0, 1.0, tol=1e-6)
            rep = verify_random_periodicity(CUBIC, p, rps)
            assert rep.shift_residual == 0.0
            assert rep.shift_pass

    def test_flow_residual_within_tolerance(self):
        p = NoisePath(seed=6, dim=1, grid=CGRID)
        rps = random_periodic_path(CUBIC, p, 0.0, 1.0, tol=1e-6)
        rep = verify_random_periodicity(CUBIC, p, rps)
        assert rep.flow_residual <= 10 * 1e-6
        assert rep.passed

    def test_deterministic_all_residuals_vanish(self):
        p = NoisePath(seed=1, dim=1, grid=DGRID)
        rps = random_periodic_path(DET_LIN, p, 0.0, 1.0, tol=1e-10)
        rep = verify_random_periodicity(DET_LIN, p, rps, flow_tol=1e-12)
        assert rep.flow_residual <= 1e-12
        assert rep.shift_residual <= 1e-12


class TestEnsemblePullback:
    def test_matches_single_path_bit_exact(self):
        paths = [NoisePath(seed=s, dim=1, grid=CGRID) for s in (10, 11, 12)]
        values, n_used, last_gap = pullback_values_ensemble(
            CUBIC, paths, 0.0, 1.0, tol=1e-6
        )
        for i, p in enumerate(paths):
            rps = random_periodic_path(CUBIC, p, 0.0, 1.0, tol=1e-6)
            assert values[i, 0] == rps.states[0, 0]
            assert n_used[i] == rps.n_used
            assert last_gap[i] == rps.last_gap

    def test_values_independent_of_batch(self):
        paths = [NoisePath(seed=s, dim=1, grid=CGRID) for s in range(6)]
        all_vals, _, _ = pullback_values_ensemble(CUBIC, paths, 0.0, 1.0, tol=1e-6)
        sub_vals, _, _ = pullback_values_ensemble(CUBIC, paths[2:4], 0.0, 1.0, tol=1e-6)
        assert np.array_equal(all_vals[2:4], sub_vals)
