"""Closed-form linear references: values, invariances, pullback agreement."""

import numpy as np
import pytest

from rpsde.errors import InvalidSpecError
from rpsde.models import LinearPeriodicSpec, build_linear_periodic
from rpsde.noise import NoisePath
from rpsde.oracle import LinearOracle, linear_phase_variance, linear_rps_exact, ou_transition
from rpsde.pullback import random_periodic_path
from rpsde.trig import TrigPoly

SPEC = LinearPeriodicSpec(alpha=TrigPoly(1.0, sin_coeffs=(0.5,)), noise_scale=1.0)
ORACLE = LinearOracle(SPEC)
MODEL = build_linear_periodic(SPEC)
GRID = MODEL.grid_for(1e-3)
TAU = GRID.period


class TestStochasticConvolution:
    def test_shift_identity_bit_exact(self):
        p = NoisePath(seed=3, dim=1, grid=GRID)
        n = GRID.steps_per_period
        for s_node in (0, 137, n // 2):
            s = s_node * GRID.dt
            assert linear_rps_exact(ORACLE, p.shift(n), s, 10 * TAU) == linear_rps_exact(
                ORACLE, p, s + TAU, 10 * TAU
            )

    def test_truncation_tail_bound(self):
        # analytic tail plus an allowance for pairwise-summation rounding of
        # the O(1) dot products (the tail itself sits far below one ulp)
        for seed in range(5):
            p = NoisePath(seed=seed, dim=1, grid=GRID)
            v1 = linear_rps_exact(ORACLE, p, 0.0, 8 * TAU)
            v2 = linear_rps_exact(ORACLE, p, 0.0, 16 * TAU)
            window = np.abs(p.increments(-round(16 * TAU / GRID.dt), 0)).max()
            tail = np.exp(-SPEC.alpha.mean * 8 * TAU) * window * round(16 * TAU / GRID.dt)
            assert abs(v1 - v2) <= tail + 1e-12 * max(1.0, abs(v2))

    def test_short_truncation_rejected(self):
        p = NoisePath(seed=0, dim=1, grid=GRID)
        with pytest.raises(InvalidSpecError):
            linear_rps_exact(ORACLE, p, 0.0, 2 * TAU)

    def test_constant_alpha_variance(self):
        spec = LinearPeriodicSpec(alpha=TrigPoly(1.0), noise_scale=1.0, period=2 * np.pi)
        orc = LinearOracle(spec)
        grid = build_linear_periodic(spec).grid_for(5e-3)
        vals = [
            linear_rps_exact(orc, NoisePath(seed=s, dim=1, grid=grid), 0.0, 10 * grid.period)
            for s in range(10_000)
        ]
        v = np.var(vals, ddof=1)
        se = 0.5 * np.sqrt(2.0 / (10_000 - 1))
        assert abs(v - 0.5) < 3 * se

    def test_pathwise_match_with_pullback(self):
        p = NoisePath(seed=3, dim=1, grid=GRID)
        rps = random_periodic_path(MODEL, p, 0.0, 1.0, tol=1e-9, n_cap=14)
        nodes = range(0, GRID.steps_per_period + 1, 199)
        sup = max(
            abs(rps.states[j, 0] - linear_rps_exact(ORACLE, p, j * GRID.dt, 8 * TAU))
            for j in nodes
        )
        assert sup <= 5 * GRID.dt

    def test_nonintegrable_rejected(self):
        with pytest.raises(InvalidSpecError):
            LinearOracle(LinearPeriodicSpec(alpha=TrigPoly(-0.5), noise_scale=1.0, period=1.0))


class TestPhaseVariance:
    def test_constant_alpha_closed_forms(self):
        orc1 = LinearOracle(LinearPeriodicSpec(alpha=TrigPoly(1.0), period=2 * np.pi))
        assert linear_phase_variance(orc1, 0.3) == pytest.approx(0.5, abs=1e-10)
        orc2 = LinearOracle(LinearPeriodicSpec(alpha=TrigPoly(2.0), period=2 * np.pi))
        assert linear_phase_variance(orc2, 0.0) == pytest.approx(0.25, abs=1e-10)

    def test_periodicity(self):
        for s in (0.0, 0.7, 3.1):
            assert linear_phase_variance(ORACLE, s) == pytest.approx(
                linear_phase_variance(ORACLE, s + TAU), abs=1e-10
            )


class TestOuTransition:
    def test_no_evolution(self):
        assert ou_transition(1.0, 2.0, 2.0, 1.5) == (1.5, 0.0)

    def test_unit_time_values(self):
        mean, var = ou_transition(1.0, 0.0, 1.0, 0.0)
        assert mean == 0.0
        assert var == pytest.approx((1 - np.exp(-2)) / 2, abs=1e-12)

    def test_long_time_limit(self):
        _, var = ou_transition(1.0, 0.0, 200.0, 3.0)
        assert var == pytest.approx(0.5, abs=1e-12)

    def test_composition(self):
        m1, v1 = ou_transition(0.7, 0.0, 0.4, 2.0)
        m2, v2 = ou_transition(0.7, 0.4, 1.0, m1)
        m_full, v_full = ou_transition(0.7, 0.0, 1.0, 2.0)
        assert m2 == pytest.approx(m_full, abs=1e-12)
        assert v1 * np.exp(-2 * 0.7 * 0.6) + v2 == pytest.approx(v_full, abs=1e-12)

    def test_time_varying_reduces_to_constant(self):
        mean_c, var_c = ou_transition(1.0, 0.0, 1.0, 0.5)
        mean_t, var_t = ou_transition(TrigPoly(1.0), 0.0, 1.0, 0.5)
        assert mean_t == pytest.approx(mean_c, abs=1e-12)
        assert var_t == pytest.approx(var_c, abs=1e-10)

    def test_nonpositive_rate_rejected(self):
        with pytest.raises(InvalidSpecError):
            ou_transition(0.0, 0.0, 1.0, 0.0)
